// Pure gallery-shaping logic: the manifest's ranking is the single source
// of display order. The UI never re-sorts by score.

import type { ImageRecord, Manifest } from "./api.js";

export interface GalleryStrip {
  key: [number, number]; // (x_dim, y_dim)
  label: string;
  groupScore: number;
  images: ImageRecord[]; // in manifest rank order
}

export interface GalleryView {
  jobId: string;
  bins: number;
  k: number;
  strips: GalleryStrip[];
}

function dimLabel(manifest: Manifest, index: number): string {
  const entry = manifest.dims.find((d) => d.index === index);
  return entry ? entry.label : `dim ${index}`;
}

/** Ranked images grouped into strips, strictly in manifest ranking order:
 * strips appear in order of their first ranked image, images within a
 * strip in ranking order. */
export function buildGalleryView(manifest: Manifest): GalleryView {
  const byId = new Map(manifest.images.map((img) => [img.id, img]));
  const strips: GalleryStrip[] = [];
  const stripIndex = new Map<string, GalleryStrip>();
  for (const imageId of manifest.ranking) {
    const img = byId.get(imageId);
    if (!img) continue; // ranking references a missing record: skip, never invent
    const key = `${img.group[0]}:${img.group[1]}`;
    let strip = stripIndex.get(key);
    if (!strip) {
      strip = {
        key: [img.group[0], img.group[1]],
        label: `${dimLabel(manifest, img.group[0])} x ${dimLabel(manifest, img.group[1])}`,
        groupScore: 0,
        images: [],
      };
      stripIndex.set(key, strip);
      strips.push(strip);
    }
    strip.images.push(img);
    strip.groupScore += img.score;
  }
  return { jobId: manifest.job_id, bins: manifest.bins, k: manifest.k, strips };
}

/** All k z-partition siblings of an image (same triple, same z dimension),
 * ordered by partition start, for side-by-side display. */
export function partitionSiblings(manifest: Manifest, image: ImageRecord): ImageRecord[] {
  return manifest.images
    .filter(
      (img) =>
        img.z_dim === image.z_dim &&
        img.triple[0] === image.triple[0] &&
        img.triple[1] === image.triple[1] &&
        img.triple[2] === image.triple[2],
    )
    .sort((a, b) => a.z_range[0] - b.z_range[0]);
}
