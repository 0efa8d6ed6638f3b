// Typed client for the gallery service HTTP API. All data the UI shows
// comes through here; nothing is recomputed client-side.

export interface ImageRecord {
  id: string;
  file: string;
  triple: [number, number, number];
  x_dim: number;
  y_dim: number;
  z_dim: number;
  z_range: [number, number];
  score: number;
  group: [number, number];
  degenerate: boolean;
  total: number;
  expected: number;
  rank: number | null;
}

export interface DimensionEntry {
  index: number;
  id: number;
  label: string;
}

export interface Manifest {
  job_id: string;
  request: Record<string, unknown>;
  dims: DimensionEntry[];
  bins: number;
  k: number;
  images: ImageRecord[];
  ranking: string[];
  bin_boundaries: Record<string, string>;
  stats_file: string | null;
}

// One bin's original-value range; null marks an empty bin. Values are
// numbers, strings (text/timestamp dims) or 2-element arrays (composites).
export type BinRange = [unknown, unknown] | null;

export interface BinBoundaries {
  dim: number;
  bins: number;
  ranges: BinRange[];
}

export interface JobStatus {
  job_id: string;
  status: "queued" | "running" | "done" | "error";
  error: string | null;
  manifest_url: string | null;
}

export interface JobSubmitResponse {
  job_id: string;
  status: string;
}

export interface DatasetInfo {
  dataset_dir: string;
  row_count: number;
  dims: { id: number; label: string; source: string[] }[];
  value_columns: Record<string, number>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.base + path);
    if (!resp.ok) {
      const detail = await resp.text().catch(() => "");
      throw new Error(`GET ${path} -> ${resp.status} ${detail}`);
    }
    return (await resp.json()) as T;
  }

  manifest(jobId: string): Promise<Manifest> {
    return this.getJson(`/api/manifest/${jobId}`);
  }

  bins(jobId: string, dim: number): Promise<BinBoundaries> {
    return this.getJson(`/api/bins/${jobId}/${dim}`);
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.getJson(`/api/jobs/${jobId}`);
  }

  listJobs(): Promise<{ job_id: string; status: string }[]> {
    return this.getJson(`/api/jobs`);
  }

  datasetInfo(dir: string): Promise<DatasetInfo> {
    return this.getJson(`/api/dataset-info?dir=${encodeURIComponent(dir)}`);
  }

  imageUrl(imageId: string): string {
    return `${this.base}/api/images/${imageId}`;
  }

  async submitJob(body: Record<string, unknown>): Promise<JobSubmitResponse> {
    const resp = await this.fetchFn(`${this.base}/api/jobs`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      let detail = "";
      try {
        const doc = await resp.json();
        detail = typeof doc.detail === "string" ? doc.detail : JSON.stringify(doc.detail);
      } catch {
        detail = await resp.text().catch(() => "");
      }
      throw new Error(detail || `POST /api/jobs -> ${resp.status}`);
    }
    return (await resp.json()) as JobSubmitResponse;
  }
}
