/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_cascadedemo_free: (a: number, b: number) => void;
export const anonymize: (a: number, b: number) => [number, number];
export const cascadedemo_classify: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const cascadedemo_new: (a: number) => [number, number, number];
export const cascadedemo_sample: (a: number, b: number) => [number, number];
export const labels: () => [number, number];
export const lookup: (a: number, b: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
