// Minimal viewer: pick a model, then drive the camera with the keyboard.
// Arrow keys turn, W/S/A/D move. One request in flight at a time.

const state = { model: null, az: 0, el: 0, t: [0, 0, 0], busy: false, dirty: false, frame: 0 };
const W = 960, H = 540, HFOV = Math.PI / 3;

async function listModels() {
  const list = await (await fetch('/models')).json();
  const box = document.getElementById('models');
  for (const m of list) {
    const b = document.createElement('button');
    b.textContent = `${m.name} (${m.state})`;
    b.onclick = async () => {
      const r = await fetch(`/models/${m.id}/load`, { method: 'POST' });
      if (!r.ok) { alert((await r.json()).error); return; }
      state.model = m.id;
      document.getElementById('viewer').hidden = false;
      request();
    };
    box.appendChild(b);
  }
}

async function request() {
  if (state.busy) { state.dirty = true; return; }
  state.busy = true;
  const fx = W / (2 * Math.tan(HFOV / 2));
  const body = {
    model_id: state.model, azimuth: state.az, elevation: state.el, translation: state.t,
    fx, fy: fx, cx: W / 2, cy: H / 2, width: W, height: H, jpeg_quality: 75, frame_id: ++state.frame,
  };
  const start = performance.now();
  const res = await fetch('/render', { method: 'POST', body: JSON.stringify(body) });
  const status = document.getElementById('status');
  if (res.ok) {
    const blob = await res.blob();
    const img = document.getElementById('frame');
    URL.revokeObjectURL(img.src);
    img.src = URL.createObjectURL(blob);
    status.textContent = `${(performance.now() - start).toFixed(1)} ms, ${blob.size} B, render ${res.headers.get('X-Render-Ms')} ms`;
  } else {
    status.textContent = (await res.json()).error;
  }
  state.busy = false;
  if (state.dirty) { state.dirty = false; request(); }
}

document.addEventListener('keydown', (e) => {
  if (!state.model) return;
  const rad = (state.az * Math.PI) / 180;
  const f = [Math.sin(rad), 0, Math.cos(rad)], r = [Math.cos(rad), 0, -Math.sin(rad)];
  const move = (v, s) => { state.t = state.t.map((x, i) => x + s * v[i]); };
  switch (e.key) {
    case 'ArrowLeft': state.az -= 3; break;
    case 'ArrowRight': state.az += 3; break;
    case 'ArrowUp': state.el = Math.min(89, state.el + 3); break;
    case 'ArrowDown': state.el = Math.max(-89, state.el - 3); break;
    case 'w': move(f, 0.2); break;
    case 's': move(f, -0.2); break;
    case 'd': move(r, 0.2); break;
    case 'a': move(r, -0.2); break;
    default: return;
  }
  request();
});

listModels();
