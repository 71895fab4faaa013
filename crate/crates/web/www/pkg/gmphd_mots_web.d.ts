/* tslint:disable */
/* eslint-disable */

/**
 * Appearance response of a trained filter on a displaced box.
 */
export class KcfProbe {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly affinity: number;
    readonly height: number;
    /**
     * Distance map, dark where the response is strong.
     */
    readonly rgba: Uint8Array;
    readonly width: number;
}

/**
 * One tracked synthetic sequence.
 */
export class SceneRun {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Frame `t` with tracked masks and ids drawn on it.
     */
    frame_rgba(t: number): Uint8Array;
    /**
     * Object ids drawn in frame `t`.
     */
    ids(t: number): Uint32Array;
    /**
     * Appearance filter probe; see [`SceneRun::probe`].
     */
    kcf_probe(t: number, index: number, dx: number, dy: number): KcfProbe;
    /**
     * Motion likelihood of the tracks predicted into frame `t`, over the frame.
     */
    likelihood_rgba(t: number): Uint8Array;
    /**
     * Generates and tracks a scene. `scenario` is crossing, occlusion,
     * clutter or parallel; `pipeline` is 1 to 5.
     */
    constructor(scenario: string, seed: number, pipeline: number, dropout: number, jitter: number);
    readonly frames: number;
    readonly height: number;
    /**
     * Metrics of the whole run as text.
     */
    readonly report: string;
    readonly width: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_kcfprobe_free: (a: number, b: number) => void;
    readonly __wbg_scenerun_free: (a: number, b: number) => void;
    readonly kcfprobe_affinity: (a: number) => number;
    readonly kcfprobe_height: (a: number) => number;
    readonly kcfprobe_rgba: (a: number) => [number, number];
    readonly kcfprobe_width: (a: number) => number;
    readonly scenerun_frame_rgba: (a: number, b: number) => [number, number];
    readonly scenerun_frames: (a: number) => number;
    readonly scenerun_height: (a: number) => number;
    readonly scenerun_ids: (a: number, b: number) => [number, number];
    readonly scenerun_kcf_probe: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly scenerun_likelihood_rgba: (a: number, b: number) => [number, number, number, number];
    readonly scenerun_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly scenerun_report: (a: number) => [number, number];
    readonly scenerun_width: (a: number) => number;
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
