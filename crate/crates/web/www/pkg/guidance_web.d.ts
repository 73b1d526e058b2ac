/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Adds a click and updates guidance and prediction. Returns the new Dice.
     */
    add_click(x: number, y: number, z: number, foreground: boolean): number;
    clear(): void;
    /**
     * Clicks as flat `[x, y, z, fg]` quadruples.
     */
    clicks(): Uint32Array;
    /**
     * Dice of the current prediction, 0 before the first foreground click.
     */
    dice(): number;
    kind(): string;
    n_clicks(): number;
    constructor(phantom: string, size: number, seed: number);
    /**
     * Radius the adaptive encoder picked for each foreground click, in
     * click order. Empty for the other encoders.
     */
    per_click_sigmas(): Uint32Array;
    /**
     * Switches the encoder (`disk`, `heatmap`, `edt`, `gdt`, `exp-gdt`,
     * `adaptive`) and re-encodes the current clicks.
     */
    set_kind(kind: string): void;
    set_sigma(sigma: number): void;
    set_theta(theta_percent: number): void;
    /**
     * Replaces the clicks with a simulated session of `n_clicks` and
     * returns its Dice trajectory.
     */
    simulate(n_clicks: number, seed: number): Float64Array;
    size(): number;
    /**
     * RGBA pixels of slice `z`: the image in gray, foreground guidance in
     * red, background guidance in blue, the prediction tinted yellow and
     * the ground-truth outline in green.
     */
    slice_rgba(z: number): Uint8Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_add_click: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly demo_clear: (a: number) => void;
    readonly demo_clicks: (a: number) => [number, number];
    readonly demo_dice: (a: number) => number;
    readonly demo_kind: (a: number) => [number, number];
    readonly demo_n_clicks: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly demo_per_click_sigmas: (a: number) => [number, number];
    readonly demo_set_kind: (a: number, b: number, c: number) => [number, number];
    readonly demo_set_sigma: (a: number, b: number) => [number, number];
    readonly demo_set_theta: (a: number, b: number) => [number, number];
    readonly demo_simulate: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_size: (a: number) => number;
    readonly demo_slice_rgba: (a: number, b: number) => [number, number];
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
