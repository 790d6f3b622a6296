/* tslint:disable */
/* eslint-disable */

export class Lab {
    free(): void;
    [Symbol.dispose](): void;
    grid(i: number): Uint32Array;
    heatmap(i: number, query: string): Float64Array;
    constructor(seed: number, count: number, epochs: number, granularity: string);
    region(i: number): Uint32Array;
    sceneCount(): number;
    shortCaption(i: number): string;
}

export function scheduleTrace(total: number, t1_frac: number, t2_frac: number, alpha_start: number, alpha_min: number, delta: number, order: string, seed: number): Float64Array;

export function stretchCurves(len: number, theta: number, lambda: number, mode: string, dim_index: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_lab_free: (a: number, b: number) => void;
    readonly lab_grid: (a: number, b: number) => [number, number, number, number];
    readonly lab_heatmap: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly lab_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly lab_region: (a: number, b: number) => [number, number, number, number];
    readonly lab_sceneCount: (a: number) => number;
    readonly lab_shortCaption: (a: number, b: number) => [number, number, number, number];
    readonly scheduleTrace: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly stretchCurves: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
