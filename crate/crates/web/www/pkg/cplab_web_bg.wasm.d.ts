/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_simulation_free: (a: number, b: number) => void;
export const probe_gn: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const simulation_advance: (a: number, b: number) => [number, number, number];
export const simulation_density: (a: number) => [number, number];
export const simulation_diagnostics: (a: number) => [number, number, number, number];
export const simulation_n: (a: number) => number;
export const simulation_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const simulation_signal: (a: number) => [number, number, number, number];
export const simulation_steps: (a: number) => number;
export const simulation_time: (a: number) => number;
export const thresholds: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
