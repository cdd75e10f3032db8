import init, { preset_names, timestamp_table, solve_cycle, simulate } from "./pkg/ospkit_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = { bnb: "#1f6feb", greedy: "#d2691e" };

function call(f, ...args) {
  try {
    return [JSON.parse(f(...args)), null];
  } catch (e) {
    return [null, String(e)];
  }
}

function showError(el, msg) {
  el.innerHTML = "";
  const p = document.createElement("p");
  p.className = "err";
  p.textContent = msg;
  el.appendChild(p);
}

function fmt(x) {
  return x === null ? "-" : Number(x).toPrecision(6);
}

function runTimestamps() {
  const out = $("ts-out");
  const [rows, err] = call(timestamp_table, Number($("ts-period").value), $("ts-obs").value, Number($("ts-cycles").value));
  if (err) return showError(out, err);
  const head = rows[0].map((_, n) => `<th>obs ${n}</th>`).join("");
  const body = rows.map((r, k) => `<tr><th>${k + 1}</th>${r.map((t) => `<td>${fmt(t)}</td>`).join("")}</tr>`).join("");
  out.innerHTML = `<table><tr><th>cycle</th>${head}</tr>${body}</table>`;
}

// Airtime timeline: candidates sent back to back from each sample time, then the action slots.
function drawCycle(view) {
  const c = $("cy-canvas");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const x0 = 40, w = c.width - 60;
  const sx = (t) => x0 + ((t - view.cycle_start) / view.period) * w;
  g.font = "12px system-ui";
  g.fillStyle = "#eee";
  g.fillRect(sx(view.cycle_start + view.budget), 10, sx(view.cycle_start + view.period) - sx(view.cycle_start + view.budget), c.height - 30);
  g.fillStyle = "#555";
  g.fillText("actions", sx(view.cycle_start + view.budget) + 4, 24);
  const lanes = [["bnb", view.bnb], ["greedy", view.greedy]];
  lanes.forEach(([name, sol], lane) => {
    const y = 40 + lane * 70;
    g.fillStyle = "#000";
    g.fillText(name, 2, y + 14);
    const chosen = new Set(sol.observers);
    let d = view.cycle_start;
    view.candidates.forEach((cand) => {
      if (!chosen.has(cand.observer)) return;
      const s = Math.max(cand.timestamp, d);
      d = s + cand.airtime;
      g.fillStyle = COLORS[name];
      g.fillRect(sx(s), y, Math.max(1, sx(d) - sx(s)), 20);
      g.fillStyle = "#fff";
      g.fillText(String(cand.observer), sx(s) + 3, y + 14);
    });
    g.fillStyle = "#000";
    g.fillText(`mse ${fmt(sol.mse)}`, sx(view.cycle_start) , y + 36);
  });
  g.strokeStyle = "#000";
  g.beginPath();
  g.moveTo(sx(view.cycle_start), c.height - 20);
  g.lineTo(sx(view.cycle_start + view.period), c.height - 20);
  g.stroke();
  view.candidates.forEach((cand) => {
    g.fillRect(sx(cand.timestamp) - 1, c.height - 24, 2, 8);
  });
}

function runCycle() {
  const out = $("cy-out");
  const [view, err] = call(solve_cycle, $("cy-preset").value, Number($("cy-seed").value), Number($("cy-k").value));
  if (err) return showError(out, err);
  const row = (name, s) =>
    `<tr class="${name}"><th>${name}</th><td>${s.seq}</td><td>${s.observers.join("+") || "-"}</td><td>${fmt(s.end_of_harvest)}</td><td>${fmt(s.mse)}</td><td>${s.nodes_visited}</td></tr>`;
  out.innerHTML =
    `<p>${view.candidates.length} candidates, harvesting budget ${fmt(view.budget)} s</p>` +
    `<table><tr><th></th><th>sequence</th><th>observers</th><th>d</th><th>MSE</th><th>nodes</th></tr>` +
    row("bnb", view.bnb) + row("greedy", view.greedy) + `</table>`;
  drawCycle(view);
}

function drawSeries(runs) {
  const c = $("sim-canvas");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const all = runs.flatMap((r) => r.mse_pred).filter((v) => v > 0);
  const lo = Math.log10(Math.min(...all)), hi = Math.log10(Math.max(...all));
  const n = runs[0].mse_pred.length;
  const sx = (i) => 50 + (i / Math.max(1, n - 1)) * (c.width - 60);
  const sy = (v) => c.height - 20 - ((Math.log10(v) - lo) / Math.max(1e-12, hi - lo)) * (c.height - 40);
  g.font = "12px system-ui";
  g.fillStyle = "#000";
  g.fillText(Math.pow(10, hi).toExponential(1), 2, 20);
  g.fillText(Math.pow(10, lo).toExponential(1), 2, c.height - 20);
  runs.forEach((r) => {
    g.strokeStyle = COLORS[r.policy];
    g.beginPath();
    r.mse_pred.forEach((v, i) => (i ? g.lineTo(sx(i), sy(v)) : g.moveTo(sx(i), sy(v))));
    g.stroke();
  });
}

function runSim() {
  const out = $("sim-out");
  const runs = [];
  for (const policy of ["bnb", "greedy"]) {
    const [r, err] = call(simulate, $("sim-preset").value, policy, Number($("sim-cycles").value), Number($("sim-seed").value));
    if (err) return showError(out, err);
    runs.push(r);
  }
  const mean = (xs) => xs.reduce((a, b) => a + b, 0) / xs.length;
  out.innerHTML =
    `<table><tr><th></th><th>mean predicted MSE</th><th>mean squared error</th><th>mean harvested</th></tr>` +
    runs.map((r) => `<tr class="${r.policy}"><th>${r.policy}</th><td>${fmt(mean(r.mse_pred))}</td><td>${fmt(mean(r.sq_err))}</td><td>${fmt(mean(r.harvested))}</td></tr>`).join("") +
    `</table><p>Predicted MSE per cycle (log scale).</p>`;
  drawSeries(runs);
}

await init();
const [names] = call(preset_names);
for (const id of ["cy-preset", "sim-preset"]) {
  $(id).innerHTML = names.map((n) => `<option>${n}</option>`).join("");
}
$("cy-preset").value = "baseline-compare";
$("sim-preset").value = "baseline-compare";
$("ts-run").onclick = runTimestamps;
$("cy-run").onclick = runCycle;
$("sim-run").onclick = runSim;
$("status").textContent = "";
runTimestamps();
runCycle();
