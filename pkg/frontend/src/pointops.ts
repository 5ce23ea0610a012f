/**
 * Point-set sampling and grouping with reproducible indices.
 *
 * Points are canonically ordered (lexicographic sort) before sampling so the
 * selected indices depend only on the point SET, never on arrival order.
 * Index computation is pure bookkeeping (no gradients) and is memoized per
 * observation since the same observed cloud is revisited across updates.
 */

export type Points = Float64Array; // row-major [n, 3]

export function canonicalOrder(pts: Points): Int32Array {
  const n = pts.length / 3;
  const idx = new Int32Array(n);
  for (let i = 0; i < n; i++) idx[i] = i;
  const arr = Array.from(idx);
  arr.sort((a, b) => {
    for (let k = 0; k < 3; k++) {
      const d = pts[a * 3 + k] - pts[b * 3 + k];
      if (d !== 0) return d;
    }
    return a - b;
  });
  return Int32Array.from(arr);
}

/** Greedy farthest-point sampling; deterministic start at row 0. Indices may
 * repeat (cyclically) when fewer than k points exist. */
export function farthestPointSample(pts: Points, k: number): Int32Array {
  const n = pts.length / 3;
  const out = new Int32Array(k);
  if (n === 0) throw new Error("empty point set");
  const dist = new Float64Array(n).fill(Infinity);
  let pick = 0;
  for (let s = 0; s < k; s++) {
    if (s > 0) {
      let best = -Infinity;
      let arg = 0;
      for (let i = 0; i < n; i++)
        if (dist[i] > best) {
          best = dist[i];
          arg = i;
        }
      pick = arg;
    }
    out[s] = s < n ? pick : out[s % n];
    const px = pts[pick * 3];
    const py = pts[pick * 3 + 1];
    const pz = pts[pick * 3 + 2];
    for (let i = 0; i < n; i++) {
      const dx = pts[i * 3] - px;
      const dy = pts[i * 3 + 1] - py;
      const dz = pts[i * 3 + 2] - pz;
      const d = dx * dx + dy * dy + dz * dz;
      if (d < dist[i]) dist[i] = d;
    }
  }
  return out;
}

/** g nearest point indices per center (center included), ties to lower index,
 * padded by repeating the nearest when the cloud is smaller than g. */
export function groupNeighbors(pts: Points, centers: Int32Array, g: number): Int32Array {
  const n = pts.length / 3;
  const out = new Int32Array(centers.length * g);
  const d = new Float64Array(n);
  const order = new Array<number>(n);
  for (let c = 0; c < centers.length; c++) {
    const cx = pts[centers[c] * 3];
    const cy = pts[centers[c] * 3 + 1];
    const cz = pts[centers[c] * 3 + 2];
    for (let i = 0; i < n; i++) {
      const dx = pts[i * 3] - cx;
      const dy = pts[i * 3 + 1] - cy;
      const dz = pts[i * 3 + 2] - cz;
      d[i] = dx * dx + dy * dy + dz * dz;
      order[i] = i;
    }
    order.sort((a, b) => d[a] - d[b] || a - b);
    for (let j = 0; j < g; j++) out[c * g + j] = order[Math.min(j, n - 1)];
  }
  return out;
}

export interface StageIndices {
  centers: Int32Array; // indices into the stage input
  groups: Int32Array; // [K * G] indices into the stage input
}

export interface SamplingPlan {
  order: Int32Array; // canonical reordering of the raw input
  stages: StageIndices[];
}

export interface StageConfig {
  k: number;
  g: number;
  channels: number;
}

/** Precompute canonical ordering plus per-stage sampling/grouping indices. */
export function buildSamplingPlan(ptsRaw: Points, stages: StageConfig[]): SamplingPlan {
  const order = canonicalOrder(ptsRaw);
  let pts = new Float64Array(order.length * 3);
  for (let i = 0; i < order.length; i++)
    pts.set(ptsRaw.subarray(order[i] * 3, order[i] * 3 + 3), i * 3);
  const plan: SamplingPlan = { order, stages: [] };
  for (const st of stages) {
    const centers = farthestPointSample(pts, st.k);
    const groups = groupNeighbors(pts, centers, st.g);
    plan.stages.push({ centers, groups });
    const next = new Float64Array(st.k * 3);
    for (let i = 0; i < st.k; i++) next.set(pts.subarray(centers[i] * 3, centers[i] * 3 + 3), i * 3);
    pts = next;
  }
  return plan;
}

/** FNV-1a over the raw bytes; good enough to key the observation cache. */
export function hashPoints(pts: Points): string {
  const bytes = new Uint8Array(pts.buffer, pts.byteOffset, pts.byteLength);
  let h1 = 0x811c9dc5;
  let h2 = 0x01000193;
  for (let i = 0; i < bytes.length; i++) {
    h1 = Math.imul(h1 ^ bytes[i], 0x01000193) >>> 0;
    h2 = (Math.imul(h2 + bytes[i], 0x85ebca6b) ^ (h2 >>> 13)) >>> 0;
  }
  return `${pts.length}:${h1.toString(16)}:${h2.toString(16)}`;
}

export class PlanCache {
  private map = new Map<string, SamplingPlan>();

  constructor(private stages: StageConfig[], private capacity = 4096) {}

  get(pts: Points): SamplingPlan {
    const key = hashPoints(pts);
    let plan = this.map.get(key);
    if (!plan) {
      plan = buildSamplingPlan(pts, this.stages);
      if (this.map.size >= this.capacity) {
        const first = this.map.keys().next().value;
        if (first !== undefined) this.map.delete(first);
      }
      this.map.set(key, plan);
    }
    return plan;
  }
}
