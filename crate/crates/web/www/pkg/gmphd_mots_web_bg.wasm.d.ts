/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_kcfprobe_free: (a: number, b: number) => void;
export const __wbg_scenerun_free: (a: number, b: number) => void;
export const kcfprobe_affinity: (a: number) => number;
export const kcfprobe_height: (a: number) => number;
export const kcfprobe_rgba: (a: number) => [number, number];
export const kcfprobe_width: (a: number) => number;
export const scenerun_frame_rgba: (a: number, b: number) => [number, number];
export const scenerun_frames: (a: number) => number;
export const scenerun_height: (a: number) => number;
export const scenerun_ids: (a: number, b: number) => [number, number];
export const scenerun_kcf_probe: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const scenerun_likelihood_rgba: (a: number, b: number) => [number, number, number, number];
export const scenerun_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const scenerun_report: (a: number) => [number, number];
export const scenerun_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
