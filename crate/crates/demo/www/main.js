import init, { snDensity, stCdf, samplePaths } from "./pkg/cdp_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

// Axes plus a mapping from data to pixels.
function frame(canvas, x0, x1, y0, y1) {
  const ctx = canvas.getContext("2d");
  const pad = { l: 50, r: 10, t: 10, b: 28 };
  const w = canvas.width - pad.l - pad.r;
  const h = canvas.height - pad.t - pad.b;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const px = (x) => pad.l + ((x - x0) / (x1 - x0)) * w;
  const py = (y) => pad.t + h - ((y - y0) / (y1 - y0)) * h;
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.strokeRect(pad.l, pad.t, w, h);
  for (let i = 0; i <= 5; i++) {
    const x = x0 + ((x1 - x0) * i) / 5;
    const y = y0 + ((y1 - y0) * i) / 5;
    ctx.fillText(x.toPrecision(3), px(x) - 12, pad.t + h + 16);
    ctx.fillText(y.toPrecision(3), 4, py(y) + 4);
  }
  return { ctx, px, py };
}

function line(f, xs, ys, color, dash = []) {
  const { ctx, px, py } = f;
  ctx.strokeStyle = color;
  ctx.setLineDash(dash);
  ctx.lineWidth = 1.6;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(ys[i])) : ctx.moveTo(px(x), py(ys[i]))));
  ctx.stroke();
  ctx.setLineDash([]);
}

const normal = (x, m, v) => Math.exp((-0.5 * (x - m) * (x - m)) / v) / Math.sqrt(2 * Math.PI * v);

function fail(where, e) {
  $(where).innerHTML = `<span class="err">${e}</span>`;
}

function drawSn() {
  const n = Math.max(1, Math.round(num("sn-n")));
  const alpha = Math.pow(10, num("sn-alpha"));
  const mu = num("sn-mu");
  const s2 = num("sn-s2");
  $("sn-alpha-v").textContent = `α = ${alpha.toPrecision(3)}`;
  const sd = n * Math.sqrt(s2);
  const lo = n * mu - 3.5 * sd;
  const hi = n * mu + 3.5 * sd;
  try {
    const c = snDensity(n, alpha, mu, s2, lo, hi, 400);
    const xs = Array.from(c.x);
    const ys = Array.from(c.y);
    const iid = xs.map((x) => normal(x, n * mu, n * s2));
    const tied = xs.map((x) => normal(x, n * mu, n * n * s2));
    const top = Math.max(...ys, ...iid, ...tied) * 1.05;
    const f = frame($("sn-plot"), lo, hi, 0, top);
    line(f, xs, iid, "#aaa", [6, 4]);
    line(f, xs, tied, "#ccc", [2, 3]);
    line(f, xs, ys, COLORS[0]);
    $("sn-info").textContent = `Error bound ${c.bound.toExponential(1)}.`;
  } catch (e) {
    fail("sn-info", e);
  }
}

function stParams() {
  return [num("st-at"), num("st-rate"), num("st-ax"), num("st-mu"), num("st-s2"), num("st-t")];
}

function drawSt() {
  const p = stParams();
  $("st-t-v").textContent = p[5].toFixed(2);
  const spread = 3 + 4 * Math.sqrt(p[4]) + Math.abs(p[3]) * p[1] * p[5] * 3;
  const lo = Math.min(0, p[3] * p[1] * p[5]) - spread;
  const hi = Math.max(0, p[3] * p[1] * p[5]) + spread;
  try {
    const c = stCdf(...p, lo, hi, 500);
    const xs = Array.from(c.x);
    const ys = Array.from(c.y);
    const f = frame($("st-plot"), lo, hi, 0, 1);
    line(f, xs, ys, COLORS[1]);
    $("st-info").textContent =
      `P(no event before t) = ${c.atom.toFixed(4)} (the jump at 0). Truncation bound ${c.bound.toExponential(1)}.`;
  } catch (e) {
    fail("st-info", e);
  }
}

function drawPaths() {
  const p = stParams();
  const count = Math.max(1, Math.min(50, Math.round(num("p-count"))));
  const seed = Math.max(0, Math.round(num("p-seed")));
  try {
    const r = samplePaths(...p, count, seed);
    const t = r.times;
    const s = r.sums;
    const off = r.offsets;
    const lo = Math.min(0, ...s) - 0.5;
    const hi = Math.max(0, ...s) + 0.5;
    const f = frame($("p-plot"), 0, p[5], lo, hi);
    for (let k = 0; k + 1 < off.length; k++) {
      const xs = [0];
      const ys = [0];
      let last = 0;
      for (let i = off[k]; i < off[k + 1]; i++) {
        xs.push(t[i], t[i]);
        ys.push(last, s[i]);
        last = s[i];
      }
      xs.push(p[5]);
      ys.push(last);
      line(f, xs, ys, COLORS[k % COLORS.length]);
    }
  } catch (e) {
    fail("st-info", e);
  }
}

await init();
["sn-n", "sn-alpha", "sn-mu", "sn-s2"].forEach((id) => $(id).addEventListener("input", drawSn));
["st-at", "st-rate", "st-ax", "st-mu", "st-s2", "st-t"].forEach((id) =>
  $(id).addEventListener("input", () => {
    drawSt();
    drawPaths();
  }),
);
$("p-go").addEventListener("click", () => {
  $("p-seed").value = Math.round(num("p-seed")) + 1;
  drawPaths();
});
drawSn();
drawSt();
drawPaths();
