/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    consistency_curve(shift: number, d_max: number): Float64Array;
    /**
     * Volume extent along `axis`.
     */
    extent(axis: number): number;
    /**
     * RGBA overlay of the cropped axis-0 annotation: kept foreground green,
     * ignore gray, removed labels red.
     */
    filtered_overlay(start: number, depth: number, views: number): Uint8Array;
    /**
     * `[rows, cols]` of the projection along `axis`.
     */
    image_dims(axis_index: number): Uint32Array;
    constructor(seed: number, tubes: number, noise: number);
    projection(axis_index: number): Uint8Array;
    removed_after_crop(start: number, depth: number, views: number): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_consistency_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_extent: (a: number, b: number) => number;
    readonly demo_filtered_overlay: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_image_dims: (a: number, b: number) => [number, number, number, number];
    readonly demo_new: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_projection: (a: number, b: number) => [number, number, number, number];
    readonly demo_removed_after_crop: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
