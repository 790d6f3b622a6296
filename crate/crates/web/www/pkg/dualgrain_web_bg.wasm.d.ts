/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_lab_free: (a: number, b: number) => void;
export const lab_grid: (a: number, b: number) => [number, number, number, number];
export const lab_heatmap: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const lab_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const lab_region: (a: number, b: number) => [number, number, number, number];
export const lab_sceneCount: (a: number) => number;
export const lab_shortCaption: (a: number, b: number) => [number, number, number, number];
export const scheduleTrace: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
export const stretchCurves: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
