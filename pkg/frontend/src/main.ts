// DOM wiring: hash routing, gallery strips, hover inspector, job form.

import { ApiClient, type BinBoundaries, type ImageRecord, type Manifest } from "./api.js";
import { buildGalleryView, partitionSiblings, type GalleryStrip } from "./gallery.js";
import { formatTooltip, pixelToBin, resolveTooltip } from "./tooltip.js";
import { pollJob, toRequestBody, validateJobForm, type JobFormState } from "./jobs.js";

const api = new ApiClient("");
const app = document.getElementById("app") as HTMLElement;
const tooltipEl = document.createElement("div");
tooltipEl.className = "tooltip hidden";
document.body.appendChild(tooltipEl);

const DISPLAY = 256; // multiple of every allowed bin count: bin mapping is exact

// Bin boundaries are fetched once per (job, dim) and cached; tooltips only
// ever display what the endpoint returned.
const binsCache = new Map<string, BinBoundaries | "pending">();

function binsKey(jobId: string, dim: number) {
  return `${jobId}/${dim}`;
}

async function ensureBins(jobId: string, dim: number): Promise<BinBoundaries | null> {
  const key = binsKey(jobId, dim);
  const hit = binsCache.get(key);
  if (hit && hit !== "pending") return hit;
  if (hit === "pending") return null;
  binsCache.set(key, "pending");
  try {
    const bounds = await api.bins(jobId, dim);
    binsCache.set(key, bounds);
    return bounds;
  } catch {
    binsCache.delete(key);
    return null;
  }
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function banner(kind: "error" | "empty" | "info", text: string): HTMLElement {
  return el("div", `banner banner-${kind}`, text);
}

function dimLabel(manifest: Manifest, index: number): string {
  return manifest.dims.find((d) => d.index === index)?.label ?? `dim ${index}`;
}

// ---------------------------------------------------------------- tooltip

function attachHover(img: HTMLImageElement, record: ImageRecord, manifest: Manifest) {
  img.addEventListener("mousemove", async (ev) => {
    const rect = img.getBoundingClientRect();
    const xBin = pixelToBin(ev.clientX - rect.left, rect.width, manifest.bins, "x");
    const yBin = pixelToBin(ev.clientY - rect.top, rect.height, manifest.bins, "y");
    if (xBin === null || yBin === null) {
      tooltipEl.classList.add("hidden");
      return;
    }
    tooltipEl.style.left = `${ev.pageX + 14}px`;
    tooltipEl.style.top = `${ev.pageY + 14}px`;
    tooltipEl.classList.remove("hidden");
    const [xb, yb] = await Promise.all([
      ensureBins(manifest.job_id, record.x_dim),
      ensureBins(manifest.job_id, record.y_dim),
    ]);
    if (!xb || !yb) {
      tooltipEl.textContent = "loading bin ranges...";
      return;
    }
    const state = resolveTooltip(record.id, xBin, yBin, xb, yb);
    tooltipEl.textContent = formatTooltip(
      dimLabel(manifest, record.x_dim),
      dimLabel(manifest, record.y_dim),
      state,
    );
  });
  img.addEventListener("mouseleave", () => tooltipEl.classList.add("hidden"));
}

// ---------------------------------------------------------------- gallery

function imageCard(record: ImageRecord, manifest: Manifest, size = DISPLAY): HTMLElement {
  const card = el("figure", "image-card");
  const img = el("img", "heatmap") as HTMLImageElement;
  img.width = size;
  img.height = size;
  img.loading = "lazy";
  img.src = api.imageUrl(record.id);
  img.alt = record.id;
  attachHover(img, record, manifest);
  img.addEventListener("click", () => openInspector(record, manifest));
  const z = dimLabel(manifest, record.z_dim);
  const caption = el(
    "figcaption",
    "caption",
    `${z} in [${record.z_range[0]}, ${record.z_range[1]}) - score ${record.score.toFixed(4)}`,
  );
  if (record.degenerate) caption.textContent += " (degenerate)";
  card.append(img, caption);
  return card;
}

function stripSection(strip: GalleryStrip, manifest: Manifest): HTMLElement {
  const section = el("section", "strip");
  const head = el("header", "strip-head");
  head.append(
    el("h2", "strip-title", strip.label),
    el("span", "strip-score", `group score ${strip.groupScore.toFixed(4)}`),
  );
  const row = el("div", "strip-row");
  section.append(head, row);
  // strips below the fold fill lazily; galleries can hold thousands of images
  const fill = () => {
    for (const record of strip.images) row.appendChild(imageCard(record, manifest));
  };
  if ("IntersectionObserver" in window) {
    const obs = new IntersectionObserver((entries) => {
      if (entries.some((e) => e.isIntersecting)) {
        fill();
        obs.disconnect();
      }
    }, { rootMargin: "400px" });
    obs.observe(section);
  } else {
    fill();
  }
  return section;
}

function openInspector(record: ImageRecord, manifest: Manifest) {
  const overlay = el("div", "overlay");
  overlay.addEventListener("click", (ev) => {
    if (ev.target === overlay) overlay.remove();
  });
  const panel = el("div", "inspector");
  const title = `${dimLabel(manifest, record.x_dim)} x ${dimLabel(manifest, record.y_dim)}`
    + `, partitioned by ${dimLabel(manifest, record.z_dim)}`;
  panel.appendChild(el("h2", "strip-title", title));
  const row = el("div", "strip-row");
  for (const sibling of partitionSiblings(manifest, record)) {
    row.appendChild(imageCard(sibling, manifest, 320));
  }
  panel.appendChild(row);
  const hint = el("p", "hint", "hover a cell for its original value ranges; click outside to close");
  panel.appendChild(hint);
  overlay.appendChild(panel);
  document.body.appendChild(overlay);
}

async function renderGallery(jobId: string) {
  app.replaceChildren(el("p", "hint", `loading job ${jobId}...`));
  let manifest: Manifest;
  try {
    manifest = await api.manifest(jobId);
  } catch (err) {
    app.replaceChildren(banner("error", `cannot load job ${jobId}: ${err}`), jobNav());
    return;
  }
  const view = buildGalleryView(manifest);
  app.replaceChildren();
  app.appendChild(jobNav(jobId));
  const meta = el(
    "p",
    "hint",
    `${manifest.images.length} images, B=${manifest.bins}, k=${manifest.k}; `
    + `${view.strips.length} ranked groups shown in manifest order`,
  );
  app.appendChild(meta);
  if (view.strips.length === 0) {
    app.appendChild(banner("empty", "this job ranked no images (empty manifest ranking)"));
    return;
  }
  for (const strip of view.strips) {
    app.appendChild(stripSection(strip, manifest));
  }
}

// ---------------------------------------------------------------- job form

function jobNav(current?: string): HTMLElement {
  const nav = el("nav", "topnav");
  const jobs = el("select") as HTMLSelectElement;
  jobs.appendChild(new Option("switch job...", ""));
  api.listJobs().then((list) => {
    for (const j of list) {
      jobs.appendChild(new Option(`${j.job_id} (${j.status})`, j.job_id, false, j.job_id === current));
    }
  }).catch(() => undefined);
  jobs.addEventListener("change", () => {
    if (jobs.value) location.hash = `#job=${jobs.value}`;
  });
  const newJob = el("a", "navlink", "new job") as HTMLAnchorElement;
  newJob.href = "#submit";
  nav.append(jobs, newJob);
  return nav;
}

function renderJobForm() {
  const form = el("div", "jobform");
  form.appendChild(el("h2", "strip-title", "launch a new analysis"));

  const dirRow = el("div", "form-row");
  const dirInput = el("input") as HTMLInputElement;
  dirInput.placeholder = "dataset directory (server-side path)";
  dirInput.size = 48;
  const loadBtn = el("button", "", "load dimensions") as HTMLButtonElement;
  dirRow.append(dirInput, loadBtn);

  const dimsBox = el("div", "dims-box");
  const aggSelect = el("select") as HTMLSelectElement;
  aggSelect.appendChild(new Option("count", "count"));

  const numeric = (value: number, options: number[]) => {
    const sel = el("select") as HTMLSelectElement;
    for (const o of options) sel.appendChild(new Option(String(o), String(o), false, o === value));
    return sel;
  };
  const binsSel = numeric(128, [32, 64, 128, 256]);
  const kSel = numeric(4, [1, 2, 4, 8]);
  const backendSel = el("select") as HTMLSelectElement;
  backendSel.append(new Option("cpu", "cpu"), new Option("pim-sim", "pim-sim"));
  const dpusInput = el("input") as HTMLInputElement;
  dpusInput.value = "2048";
  dpusInput.size = 6;
  const modeSel = el("select") as HTMLSelectElement;
  modeSel.append(new Option("sync", "sync"), new Option("async", "async"));
  const mInput = el("input") as HTMLInputElement;
  mInput.value = "10";
  mInput.size = 4;
  const nInput = el("input") as HTMLInputElement;
  nInput.value = "2";
  nInput.size = 4;
  const penaltyInput = el("input") as HTMLInputElement;
  penaltyInput.value = "0.5";
  penaltyInput.size = 4;

  const errorsEl = el("p", "form-errors");
  const submitBtn = el("button", "submit", "submit job") as HTMLButtonElement;
  const statusEl = el("p", "hint");

  const labeled = (label: string, node: HTMLElement) => {
    const wrap = el("label", "labeled");
    wrap.append(el("span", "", label), node);
    return wrap;
  };

  const currentForm = (): JobFormState => ({
    datasetDir: dirInput.value,
    dims: Array.from(dimsBox.querySelectorAll<HTMLInputElement>("input:checked")).map((c) =>
      Number(c.value),
    ),
    agg: aggSelect.value,
    bins: Number(binsSel.value),
    backend: backendSel.value as "cpu" | "pim-sim",
    dpus: Number(dpusInput.value),
    mode: modeSel.value as "sync" | "async",
    k: Number(kSel.value),
    topGroups: Number(mInput.value),
    perGroup: Number(nInput.value),
    penalty: Number(penaltyInput.value),
  });

  const refresh = () => {
    const errors = validateJobForm(currentForm());
    errorsEl.textContent = errors.join("; ");
    submitBtn.disabled = errors.length > 0;
  };
  form.addEventListener("input", refresh);

  loadBtn.addEventListener("click", async () => {
    dimsBox.replaceChildren(el("span", "hint", "loading..."));
    try {
      const info = await api.datasetInfo(dirInput.value.trim());
      dimsBox.replaceChildren();
      for (const d of info.dims) {
        const lab = el("label", "dim-check");
        const cb = el("input") as HTMLInputElement;
        cb.type = "checkbox";
        cb.value = String(d.id);
        lab.append(cb, el("span", "", ` ${d.id}: ${d.label}`));
        dimsBox.appendChild(lab);
      }
      aggSelect.replaceChildren(new Option("count", "count"));
      for (const [col, width] of Object.entries(info.value_columns)) {
        const text = width === 8 ? `sum64:${col}` : `sum:${col}`;
        aggSelect.appendChild(new Option(text, text));
      }
      refresh();
    } catch (err) {
      dimsBox.replaceChildren(banner("error", `cannot read dataset: ${err}`));
    }
  });

  submitBtn.addEventListener("click", async () => {
    const body = toRequestBody(currentForm());
    submitBtn.disabled = true;
    statusEl.textContent = "submitting...";
    try {
      const submitted = await api.submitJob(body);
      statusEl.textContent = `job ${submitted.job_id}: ${submitted.status}`;
      const final = await pollJob(api, submitted.job_id, {
        onUpdate: (s) => (statusEl.textContent = `job ${s.job_id}: ${s.status}`),
      });
      if (final.status === "done") {
        location.hash = `#job=${final.job_id}`;
      } else {
        statusEl.textContent = `job failed: ${final.error ?? "unknown error"}`;
        submitBtn.disabled = false;
      }
    } catch (err) {
      statusEl.textContent = `submit failed: ${err}`;
      submitBtn.disabled = false;
    }
  });

  form.append(
    dirRow,
    dimsBox,
    el("p", "hint", "pick at least 3 dimensions"),
    labeled("aggregate", aggSelect),
    labeled("bins", binsSel),
    labeled("k partitions", kSel),
    labeled("backend", backendSel),
    labeled("DPUs", dpusInput),
    labeled("mode", modeSel),
    labeled("top groups (m)", mInput),
    labeled("per group (n)", nInput),
    labeled("penalty", penaltyInput),
    errorsEl,
    submitBtn,
    statusEl,
  );
  app.replaceChildren(jobNav(), form);
  refresh();
}

// ---------------------------------------------------------------- routing

async function route() {
  const hash = location.hash;
  const jobMatch = /^#job=([0-9a-f]+)$/.exec(hash);
  if (jobMatch && jobMatch[1]) {
    await renderGallery(jobMatch[1]);
    return;
  }
  if (hash === "#submit") {
    renderJobForm();
    return;
  }
  // landing: most recent finished job, else the form
  try {
    const jobs = await api.listJobs();
    const done = jobs.filter((j) => j.status === "done");
    const last = done[done.length - 1];
    if (last) {
      location.hash = `#job=${last.job_id}`;
      return;
    }
  } catch {
    // fall through to the form
  }
  renderJobForm();
}

window.addEventListener("hashchange", route);
void route();
