// Job form validation and submit/poll flow.

import type { ApiClient, JobStatus } from "./api.js";

export interface JobFormState {
  datasetDir: string;
  dims: number[];
  agg: string;
  bins: number;
  backend: "cpu" | "pim-sim";
  dpus: number;
  mode: "sync" | "async";
  k: number;
  topGroups: number;
  perGroup: number;
  penalty: number;
}

export const ALLOWED_BINS = [32, 64, 128, 256];

/** Empty array means submittable. */
export function validateJobForm(form: JobFormState): string[] {
  const errors: string[] = [];
  if (!form.datasetDir.trim()) errors.push("dataset directory is required");
  if (form.dims.length < 3) errors.push("select at least 3 dimensions");
  if (new Set(form.dims).size !== form.dims.length) errors.push("dimensions must be distinct");
  if (!ALLOWED_BINS.includes(form.bins)) errors.push(`bins must be one of ${ALLOWED_BINS.join(", ")}`);
  if (form.k < 1 || form.bins % form.k !== 0) errors.push("k must divide bins");
  if (form.topGroups < 1 || form.perGroup < 1) errors.push("top groups and per group must be >= 1");
  if (form.penalty < 0 || form.penalty > 1) errors.push("penalty must be in [0, 1]");
  return errors;
}

export function toRequestBody(form: JobFormState): Record<string, unknown> {
  return {
    dataset_dir: form.datasetDir.trim(),
    dims: form.dims,
    agg: form.agg,
    bins: form.bins,
    backend: form.backend,
    dpus: form.dpus,
    mode: form.mode,
    k: form.k,
    top_groups: form.topGroups,
    per_group: form.perGroup,
    penalty: form.penalty,
  };
}

export interface PollOptions {
  initialMs?: number;
  maxMs?: number;
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onUpdate?: (status: JobStatus) => void;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

/** Poll a job with backoff until it settles; resolves with the terminal
 * status (done or error). Cached duplicates resolve on the first poll. */
export async function pollJob(
  api: Pick<ApiClient, "jobStatus">,
  jobId: string,
  opts: PollOptions = {},
): Promise<JobStatus> {
  const sleep = opts.sleep ?? defaultSleep;
  const timeoutMs = opts.timeoutMs ?? 10 * 60 * 1000;
  let interval = opts.initialMs ?? 300;
  const maxInterval = opts.maxMs ?? 3000;
  let waited = 0;
  for (;;) {
    const status = await api.jobStatus(jobId);
    opts.onUpdate?.(status);
    if (status.status === "done" || status.status === "error") return status;
    if (waited >= timeoutMs) {
      throw new Error(`job ${jobId} still ${status.status} after ${waited} ms`);
    }
    await sleep(interval);
    waited += interval;
    interval = Math.min(maxInterval, interval * 1.5);
  }
}
