import init, { describe, Simulation } from "./pkg/fieldlab_web.js";

const $ = (id) => document.getElementById(id);
let sim = null;

// Line plot of ys against xs, autoscaled; a flat series gets a unit band.
function plot(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  if (ys.length === 0) return;
  let lo = Math.min(...ys), hi = Math.max(...ys);
  if (hi - lo < 1e-300) { lo -= 0.5; hi += 0.5; }
  const x0 = xs[0], x1 = xs[xs.length - 1] || 1;
  const px = (x) => 40 + (w - 50) * (x - x0) / (x1 - x0 || 1);
  const py = (y) => h - 20 - (h - 30) * (y - lo) / (hi - lo);
  ctx.fillStyle = "#555";
  ctx.font = "11px monospace";
  ctx.fillText(hi.toPrecision(6), 2, 12);
  ctx.fillText(lo.toPrecision(6), 2, h - 4);
  ctx.strokeStyle = "#1565c0";
  ctx.beginPath();
  ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
  ctx.stroke();
}

function report(el, e) {
  el.textContent = e instanceof Error ? e.message : String(e);
  el.className = "err";
}

function showSlice() {
  const t = Number($("slice").value);
  const f = sim.field(t);
  const xs = Array.from(f, (_, i) => (2 * Math.PI * i) / f.length);
  plot($("field"), xs, Array.from(f));
}

function loadPreset() {
  $("source").value = $("preset").value;
  $("summary").textContent = describe($("preset").value);
  $("summary").className = "";
}

$("preset").addEventListener("change", loadPreset);

$("describe").addEventListener("click", () => {
  try {
    $("summary").textContent = describe($("source").value);
    $("summary").className = "";
  } catch (e) {
    report($("summary"), e);
  }
});

$("run").addEventListener("click", () => {
  const status = $("status");
  try {
    if (sim) sim.free();
    sim = new Simulation($("source").value, Number($("sites").value), Number($("steps").value),
      $("profile").value, Number($("param").value));
    const times = sim.times();
    $("slice").max = String(sim.slices() - 1);
    $("slice").value = "0";
    showSlice();
    status.className = "";
    try {
      const e = Array.from(sim.energy());
      plot($("energy"), Array.from(times.slice(1, -1)), e);
      const drift = Math.max(...e.map((v) => Math.abs(v - e[0]))) / Math.abs(e[0]);
      status.textContent = `${sim.slices()} slices; relative energy drift ${drift.toExponential(2)}`;
    } catch (e) {
      plot($("energy"), [], []);
      status.textContent = `${sim.slices()} slices; no energy: ${e.message}`;
    }
  } catch (e) {
    sim = null;
    report(status, e);
  }
});

$("slice").addEventListener("input", () => sim && showSlice());

$("nonlocal").addEventListener("click", () => {
  const status = $("nonlocal-status");
  if (!sim) return report(status, "run an evolution first");
  try {
    const c = Array.from(sim.nonlocal($("family").value));
    plot($("constant"), Array.from(sim.times().slice(1, c.length + 1)), c);
    const worst = Math.max(...c.map(Math.abs));
    status.textContent = `max |C| = ${worst.toExponential(2)} over ${c.length} slabs`;
    status.className = "";
  } catch (e) {
    report(status, e);
  }
});

await init();
loadPreset();
