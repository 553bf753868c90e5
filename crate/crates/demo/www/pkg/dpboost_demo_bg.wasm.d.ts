/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_decisionmap_free: (a: number, b: number) => void;
export const decision_map: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
export const decisionmap_margins: (a: number) => [number, number];
export const decisionmap_points: (a: number) => [number, number];
export const decisionmap_resolution: (a: number) => number;
export const decisionmap_spent: (a: number) => number;
export const decisionmap_train_error: (a: number) => number;
export const loss_curves: (a: number, b: number) => [number, number, number, number];
export const sensitivity_curve: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
