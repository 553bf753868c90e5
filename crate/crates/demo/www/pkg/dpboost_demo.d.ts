/* tslint:disable */
/* eslint-disable */

/**
 * Boosted ensemble fit on the noisy disk data, evaluated on every cell of
 * the quantized plane.
 */
export class DecisionMap {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Row-major margins, row index = second attribute bin.
     */
    margins(): Float64Array;
    /**
     * Training points as `(u, v, label)` triples in `[-1, 1]^2`.
     */
    points(): Float64Array;
    /**
     * Cells per side.
     */
    readonly resolution: number;
    readonly spent: number;
    readonly train_error: number;
}

/**
 * Fits `rounds` trees of depth `depth` on `m` disk points. `epsilon <= 0`
 * trains without privacy.
 */
export function decision_map(epsilon: number, rounds: number, depth: number, m: number, resolution: number, seed: bigint): DecisionMap;

/**
 * `samples` points of `u in [0, 1]` followed by four curves of the same
 * length: `phi_alpha`, the Matsushita and 0/1 risks it interpolates, and the
 * surrogate `psi_alpha(z)` on `z in [-4, 4]`.
 */
export function loss_curves(alpha: number, samples: number): Float64Array;

/**
 * For `m = 1..=m_max`: the sensitivity bound and the change realized by
 * flipping the single positive of `m` unit examples, as `[bound.., tight..]`.
 */
export function sensitivity_curve(alpha: number, m_max: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_decisionmap_free: (a: number, b: number) => void;
    readonly decision_map: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly decisionmap_margins: (a: number) => [number, number];
    readonly decisionmap_points: (a: number) => [number, number];
    readonly decisionmap_resolution: (a: number) => number;
    readonly decisionmap_spent: (a: number) => number;
    readonly decisionmap_train_error: (a: number) => number;
    readonly loss_curves: (a: number, b: number) => [number, number, number, number];
    readonly sensitivity_curve: (a: number, b: number) => [number, number, number, number];
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
