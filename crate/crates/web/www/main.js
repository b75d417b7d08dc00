import init, { place, paint, metrics } from "./pkg/sar_narrator_web.js";

const $ = (id) => document.getElementById(id);

function show(el, text, isError) {
  el.textContent = text;
  el.classList.toggle("error", Boolean(isError));
}

function canvasPoint(canvas, event) {
  const r = canvas.getBoundingClientRect();
  const x = Math.round(((event.clientX - r.left) / r.width) * canvas.width);
  const y = Math.round(((event.clientY - r.top) / r.height) * canvas.height);
  return [Math.max(0, Math.min(canvas.width, x)), Math.max(0, Math.min(canvas.height, y))];
}

function setupPlacement() {
  const canvas = $("place-canvas");
  const ctx = canvas.getContext("2d");
  const boxes = [];
  let drag = null;

  function draw(preview) {
    ctx.fillStyle = "#1b1f24";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    ctx.strokeStyle = "#555";
    ctx.setLineDash([4, 4]);
    for (let i = 1; i < 3; i++) {
      const x = (canvas.width * i) / 3;
      const y = (canvas.height * i) / 3;
      ctx.beginPath(); ctx.moveTo(x, 0); ctx.lineTo(x, canvas.height); ctx.stroke();
      ctx.beginPath(); ctx.moveTo(0, y); ctx.lineTo(canvas.width, y); ctx.stroke();
    }
    ctx.setLineDash([]);
    ctx.strokeStyle = "#ffd54f";
    ctx.fillStyle = "#ffd54f";
    for (const b of preview ? [...boxes, preview] : boxes) {
      ctx.strokeRect(b.x_min, b.y_min, b.x_max - b.x_min, b.y_max - b.y_min);
      ctx.fillText(b.label, b.x_min + 2, b.y_min + 11);
    }
  }

  function refresh() {
    draw();
    const list = $("place-boxes");
    list.replaceChildren(...boxes.map((b) => {
      const li = document.createElement("li");
      li.textContent = `${b.label} [${b.x_min}, ${b.y_min}, ${b.x_max}, ${b.y_max}]`;
      return li;
    }));
    try {
      const out = JSON.parse(place(canvas.width, canvas.height, JSON.stringify(boxes)));
      out.cells.forEach((cell, i) => { list.children[i].textContent += ` ${cell}`; });
      show($("place-out"), out.caption);
    } catch (e) {
      show($("place-out"), e.message, true);
    }
  }

  function boxFrom(a, b) {
    return {
      label: $("place-label").value,
      x_min: Math.min(a[0], b[0]), y_min: Math.min(a[1], b[1]),
      x_max: Math.max(a[0], b[0]), y_max: Math.max(a[1], b[1]),
    };
  }

  canvas.addEventListener("pointerdown", (e) => { drag = canvasPoint(canvas, e); });
  canvas.addEventListener("pointermove", (e) => { if (drag) draw(boxFrom(drag, canvasPoint(canvas, e))); });
  canvas.addEventListener("pointerup", (e) => {
    if (!drag) return;
    const b = boxFrom(drag, canvasPoint(canvas, e));
    drag = null;
    if (b.x_max - b.x_min >= 2 && b.y_max - b.y_min >= 2) boxes.push(b);
    refresh();
  });
  $("place-clear").addEventListener("click", () => { boxes.length = 0; refresh(); });
  refresh();
}

const CATEGORIES = [
  { name: "water", color: [0, 0, 255] },
  { name: "farmland", color: [255, 255, 0] },
  { name: "village", color: [255, 0, 0] },
  { name: "forest", color: [0, 128, 0] },
  { name: "road", color: [128, 128, 128] },
];
const GRID = 16;
const UNPAINTED = 0xffff;

function setupPainting() {
  const canvas = $("paint-canvas");
  const ctx = canvas.getContext("2d");
  const cells = new Uint16Array(GRID * GRID).fill(UNPAINTED);
  const cell = canvas.width / GRID;
  let brush = 0;
  let painting = false;

  const palette = $("paint-palette");
  const buttons = CATEGORIES.map((c, i) => {
    const b = document.createElement("button");
    b.title = c.name;
    b.style.background = `rgb(${c.color.join(",")})`;
    b.addEventListener("click", () => {
      brush = i;
      buttons.forEach((x, j) => x.classList.toggle("active", j === i));
    });
    palette.append(b);
    return b;
  });
  buttons[0].classList.add("active");

  function draw() {
    for (let i = 0; i < cells.length; i++) {
      const c = CATEGORIES[cells[i]];
      ctx.fillStyle = c ? `rgb(${c.color.join(",")})` : "#111";
      ctx.fillRect((i % GRID) * cell, Math.floor(i / GRID) * cell, cell, cell);
    }
  }

  function refresh() {
    draw();
    const threshold = Number($("paint-threshold").value);
    $("paint-threshold-value").textContent = `${threshold}%`;
    try {
      const out = JSON.parse(paint(GRID, GRID, cells, JSON.stringify(CATEGORIES), threshold));
      $("paint-table").replaceChildren(...out.proportions.map((p) => {
        const tr = document.createElement("tr");
        tr.innerHTML = `<td></td><td>${p.percent.toFixed(2)}%</td>`;
        tr.firstChild.textContent = p.category;
        return tr;
      }));
      show($("paint-out"), out.caption);
    } catch (e) {
      show($("paint-out"), e.message, true);
    }
  }

  function stroke(e) {
    const [x, y] = canvasPoint(canvas, e);
    const col = Math.min(GRID - 1, Math.floor(x / cell));
    const row = Math.min(GRID - 1, Math.floor(y / cell));
    cells[row * GRID + col] = brush;
    refresh();
  }

  canvas.addEventListener("pointerdown", (e) => { painting = true; stroke(e); });
  canvas.addEventListener("pointermove", (e) => { if (painting) stroke(e); });
  window.addEventListener("pointerup", () => { painting = false; });
  $("paint-threshold").addEventListener("input", refresh);
  $("paint-clear").addEventListener("click", () => { cells.fill(UNPAINTED); refresh(); });
  refresh();
}

function setupMetrics() {
  function refresh() {
    try {
      const out = JSON.parse(metrics($("metrics-candidate").value, $("metrics-references").value));
      $("metrics-table").replaceChildren(...Object.entries(out).map(([k, v]) => {
        const tr = document.createElement("tr");
        tr.innerHTML = `<th>${k}</th><td>${v.toFixed(4)}</td>`;
        return tr;
      }));
      show($("metrics-error"), "");
    } catch (e) {
      $("metrics-table").replaceChildren();
      show($("metrics-error"), e.message, true);
    }
  }
  $("metrics-candidate").addEventListener("input", refresh);
  $("metrics-references").addEventListener("input", refresh);
  refresh();
}

await init();
setupPlacement();
setupPainting();
setupMetrics();
