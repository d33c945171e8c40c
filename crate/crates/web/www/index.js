import init, { wf_table, Lab } from "./pkg/ctxrel_web.js";

const $ = (id) => document.getElementById(id);
let lab = null;

function rankingTables(types) {
  return types.map((t) => {
    const rows = t.words
      .map((w) => `<tr><td>${w.word}</td><td>${w.score.toFixed(4)}</td><td>${w.support}</td></tr>`)
      .join("");
    return `<h3>${t.entity}</h3><table><tr><th>word</th><th>score</th><th>support</th></tr>${rows}</table>`;
  }).join("");
}

function curve(distances, scores) {
  const w = 480, h = 160, pad = 30;
  const lo = Math.min(0, ...scores), hi = Math.max(0, ...scores);
  const span = hi - lo || 1;
  const x = (i) => pad + (i / Math.max(1, distances.length - 1)) * (w - 2 * pad);
  const y = (v) => h - pad - ((v - lo) / span) * (h - 2 * pad);
  const pts = scores.map((v, i) => `${x(i)},${y(v)}`).join(" ");
  return `<svg width="${w}" height="${h}" xmlns="http://www.w3.org/2000/svg">
<line x1="${pad}" y1="${y(0)}" x2="${w - pad}" y2="${y(0)}" stroke="#999"/>
<polyline points="${pts}" fill="none" stroke="#b2182b" stroke-width="2"/>
<text x="${pad}" y="${h - 5}" font-size="11">distance 1</text>
<text x="${w - pad - 60}" y="${h - 5}" font-size="11">distance ${distances.length}</text>
</svg>`;
}

function guard(f) {
  return () => {
    try {
      f();
    } catch (e) {
      $("status").textContent = `error: ${e}`;
    }
  };
}

await init();
$("status").textContent = "ready";

$("wf-run").onclick = guard(() => {
  const out = JSON.parse(wf_table($("conll").value, $("inverse").checked, Number($("window").value)));
  $("wf-out").innerHTML = `<p>${out.sentences} sentences</p>` + rankingTables(out.types);
});

$("lab-run").onclick = guard(() => {
  $("status").textContent = "training...";
  setTimeout(guard(() => {
    if (lab) lab.free();
    lab = new Lab($("cell").value, Number($("sentences").value), Number($("epochs").value), BigInt($("seed").value));
    const s = JSON.parse(lab.summary());
    $("lab-summary").textContent =
      `test accuracy ${(100 * s.accuracy).toFixed(2)}%\n` +
      `nll per epoch ${s.nll.map((v) => v.toFixed(3)).join(" ")}\n` +
      `${s.train} train / ${s.test} test sentences\nexample: ${s.example}`;
    $("lab-heat").disabled = false;
    $("probe-run").disabled = false;
    $("status").textContent = "ready";
  }), 10);
});

$("lab-heat").onclick = guard(() => {
  const out = JSON.parse(lab.lrc_heatmap($("measure").value, 6));
  $("heat-out").innerHTML = out.svg + rankingTables(out.types);
});

$("probe-run").onclick = guard(() => {
  const out = JSON.parse(lab.probe($("ctx").value, $("ent").value, $("etype").value, Number($("maxd").value)));
  $("probe-out").innerHTML = curve(out.distances, out.scores);
});
