/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_simulation_free: (a: number, b: number) => void;
export const describe: (a: number, b: number) => [number, number, number, number];
export const simulation_energy: (a: number) => [number, number, number, number];
export const simulation_field: (a: number, b: number) => [number, number, number, number];
export const simulation_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const simulation_nonlocal: (a: number, b: number, c: number) => [number, number, number, number];
export const simulation_slices: (a: number) => number;
export const simulation_times: (a: number) => [number, number];
export const start: () => void;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
