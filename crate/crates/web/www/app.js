import init, { scheduleCurve, DatasetPreview, TrainingSession } from "./pkg/coevo_prune_web.js";

const SCHEDULES = ["fixed", "increase", "decrease", "population", "exponential", "final_n"];
const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function lines(canvas, series, { ymin = 0, ymax, marks = [] } = {}) {
  const g = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  g.clearRect(0, 0, w, h);
  const xmax = Math.max(1, ...series.map((s) => s.values.length - 1));
  const top = ymax ?? Math.max(1e-9, ...series.flatMap((s) => s.values));
  const X = (i) => pad + (i / xmax) * (w - 2 * pad);
  const Y = (v) => h - pad - ((v - ymin) / (top - ymin)) * (h - 2 * pad);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  g.fillStyle = "#555";
  g.font = "11px sans-serif";
  g.fillText(top.toPrecision(3), 2, pad + 4);
  g.fillText(ymin.toPrecision(3), 2, h - pad);
  g.fillText(String(xmax), w - pad - 8, h - pad + 14);
  g.strokeStyle = "#f3c";
  for (const m of marks) {
    g.beginPath();
    g.moveTo(X(m), h - pad);
    g.lineTo(X(m), h - pad - 6);
    g.stroke();
  }
  for (const s of series) {
    g.strokeStyle = s.color;
    g.setLineDash(s.dash ?? []);
    g.beginPath();
    s.values.forEach((v, i) => (i ? g.lineTo(X(i), Y(v)) : g.moveTo(X(i), Y(v))));
    g.stroke();
  }
  g.setLineDash([]);
}

function drawSchedules() {
  const c = num("c"), epochs = num("s-epochs"), hood = num("s-hood");
  const series = SCHEDULES.map((name, i) => ({ name, color: COLORS[i], values: Array.from(scheduleCurve(name, c, epochs, hood)) }));
  lines($("schedules"), series, { ymax: Math.max(c, 1e-9) });
  $("schedule-legend").innerHTML = series.map((s) => `<span style="color:${s.color}">■ ${s.name}</span>`).join("");
}

function drawDataset() {
  const p = new DatasetPreview(num("d-n"), num("d-k"), num("d-per"), num("d-q"), num("d-seed"));
  const bits = p.bits, clusters = p.clusters, centroids = p.centroids;
  const n = p.n, rows = clusters.length;
  $("oracle").textContent = `${rows} training samples, nearest-centroid oracle test loss per bit: ${p.oracleLoss.toFixed(5)}`;
  const canvas = $("dataset");
  const g = canvas.getContext("2d");
  const cw = canvas.width / n, ch = canvas.height / rows;
  g.clearRect(0, 0, canvas.width, canvas.height);
  for (let r = 0; r < rows; r++) {
    const c = clusters[r];
    for (let j = 0; j < n; j++) {
      const b = bits[r * n + j];
      // Bits that differ from the sample's own centroid are highlighted.
      g.fillStyle = b !== centroids[c * n + j] ? "#d62728" : b ? COLORS[c % COLORS.length] : "#fff";
      g.fillRect(j * cw, r * ch, Math.max(cw, 1), Math.max(ch, 1));
    }
  }
  p.free();
}

let session = null;

function drawSession() {
  if (!session) return;
  const train = Array.from(session.trainLoss()), test = Array.from(session.testLoss());
  const oracle = new Array(session.totalEpochs + 1).fill(session.oracleLoss);
  const marks = Array.from(session.pruneEpochs());
  lines($("loss"), [
    { color: COLORS[0], values: train },
    { color: COLORS[1], values: test },
    { color: "#777", dash: [4, 4], values: oracle },
  ], { marks });
  lines($("kept"), [{ color: COLORS[2], values: Array.from(session.preserved()) }], { ymax: 100 });
  const last = test.length - 1;
  $("progress").textContent =
    `epoch ${session.epoch}/${session.totalEpochs}  train ${train[last].toFixed(4)}  test ${test[last].toFixed(4)}` +
    `  oracle ${session.oracleLoss.toFixed(4)}  prune events ${marks.length}  (blue train, orange test, grey oracle; green: preserved %)`;
}

function newSession() {
  session?.free();
  session = new TrainingSession($("t-trainer").value, $("t-pruner").value, $("t-schedule").value, num("t-epochs"), num("t-seed"));
  drawSession();
}

function runToEnd() {
  if (!session) newSession();
  const tick = () => {
    const more = session.step(1);
    drawSession();
    if (more) requestAnimationFrame(tick);
  };
  tick();
}

function guarded(f) {
  return () => {
    try {
      f();
      $("status").textContent = "ready";
    } catch (e) {
      $("status").textContent = `error: ${e.message ?? e}`;
    }
  };
}

await init();
$("t-schedule").innerHTML = SCHEDULES.map((s) => `<option>${s}</option>`).join("");
$("t-schedule").value = "exponential";
for (const id of ["c", "s-epochs", "s-hood"]) $(id).addEventListener("input", guarded(drawSchedules));
$("d-go").addEventListener("click", guarded(drawDataset));
$("t-new").addEventListener("click", guarded(newSession));
$("t-step").addEventListener("click", guarded(() => { if (!session) newSession(); session.step(5); drawSession(); }));
$("t-run").addEventListener("click", guarded(runToEnd));
guarded(() => { drawSchedules(); drawDataset(); newSession(); })();
