/* tslint:disable */
/* eslint-disable */

/**
 * Names of the built-in scenarios.
 */
export function preset_names(): string;

/**
 * Runs a preset for `cycles` cycles under `policy` and returns the per-cycle error series.
 */
export function simulate(preset: string, policy: string, cycles: number, seed: number): string;

/**
 * Draws cycle `k` of a preset and solves it with branch-and-bound and with the greedy baseline.
 */
export function solve_cycle(preset: string, seed: number, k: number): string;

/**
 * First observation timestamp per cycle (rows) and observer (columns); null when none falls in the cycle.
 */
export function timestamp_table(period: number, obs_periods: string, cycles: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly preset_names: () => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly solve_cycle: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly timestamp_table: (a: number, b: number, c: number, d: number) => [number, number, number, number];
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
