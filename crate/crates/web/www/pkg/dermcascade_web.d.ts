/* tslint:disable */
/* eslint-disable */

export class CascadeDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `mode` is "OR" or "PR"; `triple` is `t=..,gr=..,sit=..` or empty.
     */
    classify(text: string, mode: string, triple: string): string;
    constructor(docs_per_disease: number);
    sample(index: number): string;
}

export function anonymize(text: string): string;

export function labels(): string;

export function lookup(label: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_cascadedemo_free: (a: number, b: number) => void;
    readonly anonymize: (a: number, b: number) => [number, number];
    readonly cascadedemo_classify: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly cascadedemo_new: (a: number) => [number, number, number];
    readonly cascadedemo_sample: (a: number, b: number) => [number, number];
    readonly labels: () => [number, number];
    readonly lookup: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
