/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_add_click: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const demo_clear: (a: number) => void;
export const demo_clicks: (a: number) => [number, number];
export const demo_dice: (a: number) => number;
export const demo_kind: (a: number) => [number, number];
export const demo_n_clicks: (a: number) => number;
export const demo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const demo_per_click_sigmas: (a: number) => [number, number];
export const demo_set_kind: (a: number, b: number, c: number) => [number, number];
export const demo_set_sigma: (a: number, b: number) => [number, number];
export const demo_set_theta: (a: number, b: number) => [number, number];
export const demo_simulate: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_size: (a: number) => number;
export const demo_slice_rgba: (a: number, b: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
