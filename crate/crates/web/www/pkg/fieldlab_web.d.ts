/* tslint:disable */
/* eslint-disable */

/**
 * A finished run on `[0, 2π)` with `dt = h/2`.
 */
export class Simulation {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `∫T⁰₀ dx` on slices `1..N-1`, where every derivative is central.
     * Refused for densities with explicit coordinates.
     */
    energy(): Float64Array;
    /**
     * Real channel of the first field at time slice `t`.
     */
    field(t: number): Float64Array;
    /**
     * `profile` is `"plane-wave"` (`param` is the wave number) or
     * `"gaussian"` (`param` is the width).
     */
    constructor(source: string, sites: number, steps: number, profile: string, param: number);
    /**
     * Nonlocal constant from slice 1 to every later interior slice, for
     * `"field-shift"`, `"field-scale"` or `"time-shift"`.
     */
    nonlocal(family: string): Float64Array;
    slices(): number;
    times(): Float64Array;
}

/**
 * The same text `fieldlab parse` prints.
 */
export function describe(source: string): string;

export function start(): void;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly describe: (a: number, b: number) => [number, number, number, number];
    readonly simulation_energy: (a: number) => [number, number, number, number];
    readonly simulation_field: (a: number, b: number) => [number, number, number, number];
    readonly simulation_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly simulation_nonlocal: (a: number, b: number, c: number) => [number, number, number, number];
    readonly simulation_slices: (a: number) => number;
    readonly simulation_times: (a: number) => [number, number];
    readonly start: () => void;
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
