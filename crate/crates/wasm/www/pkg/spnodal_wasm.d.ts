/* tslint:disable */
/* eslint-disable */

/**
 * Names accepted by `verify_suite`.
 */
export function mutation_names(): string;

/**
 * `h(t, s) = J(t v⁺ + s v⁻)` on `[0, t_max]²` for a field mixing a core
 * bump and a shell of opposite sign, with its projection point and the
 * sign-certified box around it. `t_max ≤ 0` picks a range that shows the
 * projection point.
 */
export function nehari_landscape(p: number, shell: number, t_max: number, samples: number): string;

/**
 * Nodal and ground-state profiles on the unit ball for `f(u) = |u|^{p-2}u`,
 * with the potential of the nodal solution and the energy history.
 */
export function solve_radial(n: number, p: number): string;

/**
 * The invariant suite on a radial grid, optionally with a deliberate fault.
 */
export function verify_suite(n: number, p: number, seed: number, samples: number, mutation: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly mutation_names: () => [number, number];
    readonly nehari_landscape: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly solve_radial: (a: number, b: number) => [number, number, number, number];
    readonly verify_suite: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
