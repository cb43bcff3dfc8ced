// Built by `wasm-bindgen --target web --out-dir www/pkg`; see the README.
import init, { gmdFlow, learnMetric, weighDocuments } from "./pkg/gmdalign_wasm.js";

const $ = (id) => document.getElementById(id);

// World coordinates [-4, 4] x [-3, 3] mapped onto each 520x390 canvas.
const SCALE = 65;
const toScreen = (c, x, y) => [c.width / 2 + x * SCALE, c.height / 2 - y * SCALE];
const toWorld = (c, px, py) => [(px - c.width / 2) / SCALE, (c.height / 2 - py) / SCALE];

function axes(ctx, c) {
  ctx.clearRect(0, 0, c.width, c.height);
  ctx.strokeStyle = "#e4e4e4";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(0, c.height / 2);
  ctx.lineTo(c.width, c.height / 2);
  ctx.moveTo(c.width / 2, 0);
  ctx.lineTo(c.width / 2, c.height);
  ctx.stroke();
}

function call(fn, input, out) {
  try {
    return JSON.parse(fn(JSON.stringify(input)));
  } catch (e) {
    out.innerHTML = `<span class="error">${e}</span>`;
    return null;
  }
}

let learned = null;

// Flow demo

const flowState = { source: [], target: [] };

function drawFlow() {
  const c = $("flow");
  const ctx = c.getContext("2d");
  axes(ctx, c);
  const out = $("flow-out");
  const { source, target } = flowState;
  if (source.length && target.length) {
    let metric = $("flow-metric").value;
    if (metric === "learned") {
      metric = learned ? { matrix: learned } : "euclidean";
    }
    const r = call(gmdFlow, { source, target, metric }, out);
    if (r) {
      for (const m of r.moves) {
        const [x1, y1] = toScreen(c, source[m.source].x, source[m.source].y);
        const [x2, y2] = toScreen(c, target[m.target].x, target[m.target].y);
        ctx.strokeStyle = "rgba(60, 60, 60, 0.55)";
        ctx.lineWidth = Math.max(1, m.flow * 24);
        ctx.beginPath();
        ctx.moveTo(x1, y1);
        ctx.lineTo(x2, y2);
        ctx.stroke();
      }
      const exact = r.exact === null ? "n/a (too large)" : r.exact.toFixed(6);
      const gap = r.exact === null ? "" : `\ngap     ${(r.gmd - r.exact).toFixed(6)}`;
      out.textContent = `gmd     ${r.gmd.toFixed(6)}\nexact   ${exact}${gap}\nmoves   ${r.moves.length}`;
    }
  } else {
    out.textContent = "add points on both sides";
  }
  const total = (pts) => pts.reduce((s, p) => s + p.w, 0);
  for (const [pts, color] of [[source, "#2d6fd6"], [target, "#e08a1e"]]) {
    const t = total(pts);
    for (const p of pts) {
      const [x, y] = toScreen(c, p.x, p.y);
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(x, y, 4 + 14 * Math.sqrt(p.w / t), 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

$("flow").addEventListener("click", (e) => {
  const c = $("flow");
  const rect = c.getBoundingClientRect();
  const [x, y] = toWorld(c, e.clientX - rect.left, e.clientY - rect.top);
  const w = Math.max(0.1, Number($("flow-weight").value) || 1);
  (e.shiftKey ? flowState.target : flowState.source).push({ x, y, w });
  drawFlow();
});
$("flow-clear").addEventListener("click", () => {
  flowState.source = [];
  flowState.target = [];
  drawFlow();
});
$("flow-random").addEventListener("click", () => {
  const pt = () => ({ x: Math.random() * 7 - 3.5, y: Math.random() * 5 - 2.5, w: 0.2 + Math.random() * 2 });
  const n = 2 + Math.floor(Math.random() * 5);
  const m = 2 + Math.floor(Math.random() * 5);
  flowState.source = Array.from({ length: n }, pt);
  flowState.target = Array.from({ length: m }, pt);
  drawFlow();
});
$("flow-metric").addEventListener("change", drawFlow);

// Metric learning demo

function drawLearn() {
  const c = $("learn");
  const ctx = c.getContext("2d");
  axes(ctx, c);
  const out = $("learn-out");
  const input = {
    algo: $("learn-algo").value,
    pairs: Number($("learn-pairs").value),
    angle: Number($("learn-angle").value),
    noise: Number($("learn-noise").value),
    seed: Number($("learn-seed").value),
    gamma: Number($("learn-gamma").value),
    sparsity: Number($("learn-sparsity").value),
    balance: Number($("learn-balance").value),
  };
  const r = call(learnMetric, input, out);
  if (!r) return;
  learned = r.matrix;

  for (const k of r.constraints) {
    const [x1, y1] = toScreen(c, k.x[0], k.x[1]);
    const [x2, y2] = toScreen(c, k.y[0], k.y[1]);
    ctx.strokeStyle = k.similar ? "rgba(30, 150, 60, 0.6)" : "rgba(200, 40, 40, 0.35)";
    ctx.setLineDash(k.similar ? [] : [4, 3]);
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
    ctx.stroke();
  }
  ctx.setLineDash([]);

  const [cx, cy] = toScreen(c, 0, 0);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.arc(cx, cy, SCALE, 0, 2 * Math.PI);
  ctx.stroke();

  // Unit balls of learned metrics can be far from 1; rescale so the
  // smaller semi-axis matches the Euclidean circle.
  const [ra, rb] = r.ellipse.radii.map((v) => (Number.isFinite(v) ? v : 1e3));
  const k = 1 / Math.min(ra, rb);
  ctx.strokeStyle = "#6b3fb5";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.ellipse(cx, cy, Math.min(ra * k, 40) * SCALE, Math.min(rb * k, 40) * SCALE, -r.ellipse.angle, 0, 2 * Math.PI);
  ctx.stroke();

  const m = r.matrix.map((v) => v.toPrecision(4).padStart(11));
  out.textContent =
    `M = [${m[0]} ${m[1]}]\n    [${m[2]} ${m[3]}]\n` +
    `satisfied ${r.satisfaction_before.toFixed(3)} -> ${r.satisfaction_after.toFixed(3)}\n` +
    `iterations ${r.iterations}${r.converged ? "" : " (not converged)"}`;
  if ($("flow-metric").value === "learned") drawFlow();
}

for (const id of ["learn-algo", "learn-pairs", "learn-angle", "learn-noise", "learn-seed", "learn-gamma", "learn-sparsity", "learn-balance"]) {
  $(id).addEventListener("input", drawLearn);
}

// Weighting demo

const SCHEMES = ["uniform", "sl", "idf", "slidf"];

function drawWeights() {
  const out = $("weigh-out");
  const docs = $("weigh-text")
    .value.split(/^---$/m)
    .map((block, i) => ({ id: `doc ${i + 1}`, sentences: block.split("\n").filter((s) => s.trim()) }))
    .filter((d) => d.sentences.length);
  if (!docs.length) {
    out.textContent = "";
    return;
  }
  const r = call(weighDocuments, docs, out);
  if (!r) return;
  const esc = (s) => s.replace(/[&<>]/g, (ch) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;" })[ch]);
  out.innerHTML = r
    .map((d) => {
      const rows = d.sentences
        .map((s) => {
          const cells = SCHEMES.map(
            (k) => `<td>${s.weights[k].toFixed(3)}<span class="bar" style="width:${Math.round(s.weights[k] * 60)}px"></span></td>`
          ).join("");
          return `<tr><td title="${esc(s.text)}">${esc(s.text)}</td><td>${s.tokens}</td><td>${s.count}</td><td>${s.doc_freq}</td>${cells}</tr>`;
        })
        .join("");
      const head = SCHEMES.map((k) => `<th>${k}</th>`).join("");
      return `<h3>${esc(d.id)}</h3><table><tr><th>sentence</th><th>tokens</th><th>count</th><th>df</th>${head}</tr>${rows}</table>`;
    })
    .join("");
}

$("weigh-text").addEventListener("input", drawWeights);

init().then(
  () => {
    $("status").textContent = "";
    $("flow-random").click();
    drawLearn();
    drawWeights();
  },
  (e) => {
    $("status").innerHTML = `<span class="error">Could not load the module: ${e}. Build it first (see README).</span>`;
  }
);
