/* tslint:disable */
/* eslint-disable */

/**
 * Routes one prompt given per-model estimates and costs.
 */
export function route_one(estimates: Float64Array, costs: Float64Array, lambda: number): string;

/**
 * Renders a test pattern, blurs it `passes` times and reports its sharpness.
 */
export function sharpness_pattern(kind: string, size: number, passes: number): string;

/**
 * Deferral curves of the two-cluster instance under k-NN and oracle routing.
 */
export function sweep_two_cluster(jitter: number, sigma_q: number, k: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly route_one: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly sharpness_pattern: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly sweep_two_cluster: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
