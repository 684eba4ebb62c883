/**
 * Browser entry point: builds the viewer UI against the reconstruction
 * service at the same origin (or ?api=<base> for development).
 */

import { ApiClient, Method } from "./api.js";
import { OrientationStore, axialOrientation } from "./orientation.js";
import { SliceViewer, attachDragControls } from "./viewer.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function toast(message: string): void {
  const el = byId<HTMLDivElement>("toast");
  el.textContent = message;
  el.classList.add("visible");
  window.setTimeout(() => el.classList.remove("visible"), 4000);
}

async function boot(): Promise<void> {
  const base = new URLSearchParams(window.location.search).get("api") ?? "";
  const api = new ApiClient(base);

  const info = await api.info();
  const size = info.volume_shape[0] ?? 128;
  const store = new OrientationStore(axialOrientation(size));

  const canvas = byId<HTMLCanvasElement>("slice-canvas");
  const viewer = new SliceViewer(api, store, canvas);
  viewer.onError = toast;
  attachDragControls(canvas, store);

  // Method toggle: n2f only once a model exists.
  const methodSelect = byId<HTMLSelectElement>("method");
  const n2fOption = methodSelect.querySelector<HTMLOptionElement>(
    'option[value="n2f"]',
  );
  if (n2fOption) n2fOption.disabled = info.model === null;
  methodSelect.addEventListener("change", () => {
    viewer.setMethod(methodSelect.value as Method);
  });

  // Center-of-rotation shift slider.
  const corSlider = byId<HTMLInputElement>("cor-shift");
  const corLabel = byId<HTMLSpanElement>("cor-shift-value");
  corSlider.value = String(info.cor_shift);
  corLabel.textContent = corSlider.value;
  corSlider.addEventListener("input", () => {
    corLabel.textContent = corSlider.value;
    viewer.setCorShift(Number(corSlider.value));
  });
  viewer.state.corShift = Number(corSlider.value);

  // Window/level: auto by default, manual once either field is edited.
  const winLo = byId<HTMLInputElement>("win-lo");
  const winHi = byId<HTMLInputElement>("win-hi");
  const winAuto = byId<HTMLInputElement>("win-auto");
  const applyWindow = () => {
    viewer.setWindow(
      winAuto.checked
        ? null
        : { lo: Number(winLo.value), hi: Number(winHi.value) },
    );
  };
  for (const el of [winLo, winHi]) {
    el.addEventListener("input", () => {
      winAuto.checked = false;
      applyWindow();
    });
  }
  winAuto.addEventListener("change", applyWindow);
  viewer.onRender = (result) => {
    if (winAuto.checked) {
      winLo.value = result.min.toPrecision(4);
      winHi.value = result.max.toPrecision(4);
    }
  };

  byId<HTMLButtonElement>("reset-view").addEventListener("click", () => {
    store.reset(axialOrientation(size));
  });

  // Training panel: submit a job, poll until done, then enable n2f.
  const trainBtn = byId<HTMLButtonElement>("train-start");
  const trainProgress = byId<HTMLProgressElement>("train-progress");
  const trainPhase = byId<HTMLSpanElement>("train-phase");
  trainBtn.addEventListener("click", async () => {
    trainBtn.disabled = true;
    try {
      const id = await api.startTraining({
        splits: Number(byId<HTMLInputElement>("train-splits").value),
        strategy: byId<HTMLSelectElement>("train-strategy").value as
          | "x1"
          | "1x",
        n_train: Number(byId<HTMLInputElement>("train-samples").value),
        seed: Number(byId<HTMLInputElement>("train-seed").value),
      });
      for (;;) {
        const status = await api.trainStatus(id);
        trainPhase.textContent = status.phase;
        trainProgress.value = status.progress;
        if (status.status === "done") {
          if (n2fOption) n2fOption.disabled = false;
          toast("training finished — denoised method available");
          break;
        }
        if (status.status === "failed") {
          toast(`training failed: ${status.error ?? "unknown error"}`);
          break;
        }
        await new Promise((r) => window.setTimeout(r, 1000));
      }
    } catch (err) {
      toast(err instanceof Error ? err.message : String(err));
    } finally {
      trainBtn.disabled = false;
    }
  });

  viewer.refresh();
}

boot().catch((err) => {
  toast(err instanceof Error ? err.message : String(err));
});
