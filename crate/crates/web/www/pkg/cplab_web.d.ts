/* tslint:disable */
/* eslint-disable */

export class Simulation {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Advances `k` adaptive steps and returns the new time.
     */
    advance(k: number): number;
    /**
     * Cell densities in row-major order (`j · n + i`).
     */
    density(): Float64Array;
    /**
     * `[t, mass, F, G, ∫|∇w|², sup u, min v]`.
     */
    diagnostics(): Float64Array;
    n(): number;
    /**
     * Bump of the given mass centred at `(cx, cy)` on an `n × n` unit square.
     */
    constructor(n: number, chi: number, beta: number, mass: number, cx: number, cy: number, width: number, original: boolean);
    /**
     * `v` in row-major order.
     */
    signal(): Float64Array;
    steps(): number;
    time(): number;
}

/**
 * Largest interpolation ratio over `samples` random trial functions on an `n × n` grid.
 */
export function probe_gn(n: number, samples: number, mode: string, seed: bigint): number;

/**
 * Threshold report for the unit square as `key = value` lines.
 */
export function thresholds(chi: number, beta: number, mass: number, cgn: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly probe_gn: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly simulation_advance: (a: number, b: number) => [number, number, number];
    readonly simulation_density: (a: number) => [number, number];
    readonly simulation_diagnostics: (a: number) => [number, number, number, number];
    readonly simulation_n: (a: number) => number;
    readonly simulation_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly simulation_signal: (a: number) => [number, number, number, number];
    readonly simulation_steps: (a: number) => number;
    readonly simulation_time: (a: number) => number;
    readonly thresholds: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
