// DOM assembly: direction sliders, undo/redo, calibration chips, toasts.
// Every <img> src is a data URL wrapping a base64 PNG exactly as the
// service returned it; pixels are never recomputed client-side.

import { ApiClient, DirectionInfo } from "./api";
import { createComparison } from "./compare";
import { SessionController } from "./session";

export const SLIDER_MIN = -6;
export const SLIDER_MAX = 6;
export const SLIDER_STEP = 0.05;

export function dataUrl(imageB64: string): string {
  return `data:image/png;base64,${imageB64}`;
}

export interface Studio {
  controller: SessionController;
  root: HTMLElement;
}

export async function createStudio(
  root: HTMLElement,
  api: ApiClient,
  options: { seed?: number; debounceMs?: number } = {},
): Promise<Studio> {
  const controller = new SessionController(api, options.debounceMs ?? 100);
  const { directions } = await api.listDirections();
  await controller.start(options.seed);

  root.innerHTML = `
    <header class="bar">
      <h1>lelsd studio</h1>
      <span class="seed" data-testid="seed"></span>
      <span class="spinner" data-testid="pending" hidden>working...</span>
    </header>
    <main>
      <section class="viewer"></section>
      <aside class="panel">
        <div class="controls" data-testid="sliders"></div>
        <div class="history">
          <button data-testid="undo">undo</button>
          <button data-testid="redo">redo</button>
          <ol class="stack" data-testid="stack"></ol>
        </div>
        <div class="calibrate">
          <label>target distance
            <input type="number" min="0" step="0.01" value="0.05" data-testid="calibrate-distance" />
          </label>
          <select data-testid="calibrate-direction"></select>
          <button data-testid="calibrate-run">calibrate</button>
          <span class="chips" data-testid="chips"></span>
          <span class="calibrate-error" data-testid="calibrate-error"></span>
        </div>
      </aside>
    </main>
    <div class="toasts" data-testid="toasts"></div>
  `;

  const comparison = createComparison(root.querySelector<HTMLElement>(".viewer")!);
  const slidersBox = root.querySelector<HTMLElement>('[data-testid="sliders"]')!;
  const stackList = root.querySelector<HTMLOListElement>('[data-testid="stack"]')!;
  const seedLabel = root.querySelector<HTMLElement>('[data-testid="seed"]')!;
  const pendingLabel = root.querySelector<HTMLElement>('[data-testid="pending"]')!;
  const undoButton = root.querySelector<HTMLButtonElement>('[data-testid="undo"]')!;
  const redoButton = root.querySelector<HTMLButtonElement>('[data-testid="redo"]')!;
  const calDirection = root.querySelector<HTMLSelectElement>('[data-testid="calibrate-direction"]')!;
  const calDistance = root.querySelector<HTMLInputElement>('[data-testid="calibrate-distance"]')!;
  const calRun = root.querySelector<HTMLButtonElement>('[data-testid="calibrate-run"]')!;
  const chips = root.querySelector<HTMLElement>('[data-testid="chips"]')!;
  const calError = root.querySelector<HTMLElement>('[data-testid="calibrate-error"]')!;
  const toasts = root.querySelector<HTMLElement>('[data-testid="toasts"]')!;

  function toast(message: string): void {
    const node = document.createElement("div");
    node.className = "toast";
    node.textContent = message;
    toasts.appendChild(node);
    setTimeout(() => node.remove(), 4000);
  }

  function guard(promise: Promise<unknown>): void {
    promise.catch((err) => toast(String(err instanceof Error ? err.message : err)));
  }

  for (const info of directions) {
    slidersBox.appendChild(buildSlider(info, controller, guard));
    const option = document.createElement("option");
    option.value = info.name;
    option.textContent = info.name;
    calDirection.appendChild(option);
  }

  undoButton.addEventListener("click", () => guard(controller.undo()));
  redoButton.addEventListener("click", () => guard(controller.redo()));

  calRun.addEventListener("click", async () => {
    calError.textContent = "";
    chips.innerHTML = "";
    const direction = calDirection.value;
    const distance = Number(calDistance.value);
    try {
      const result = await controller.calibrate(direction, distance);
      for (const alpha of [result.alpha_neg, result.alpha_pos]) {
        const chip = document.createElement("button");
        chip.className = "chip";
        chip.dataset.alpha = String(alpha);
        chip.dataset.direction = direction;
        chip.textContent = `α=${alpha.toPrecision(4)}`;
        chip.addEventListener("click", () => guard(controller.pushEdit(direction, alpha)));
        chips.appendChild(chip);
      }
    } catch (err) {
      // unreachable targets render inline, not as a toast
      calError.textContent = String(err instanceof Error ? err.message : err);
    }
  });

  function render(): void {
    comparison.setImages(dataUrl(controller.baseImage), dataUrl(controller.currentImage));
    seedLabel.textContent = `seed ${controller.seed}`;
    pendingLabel.hidden = !controller.pending;
    undoButton.disabled = controller.stack.length === 0;
    redoButton.disabled = controller.redoStack.length === 0;
    stackList.innerHTML = "";
    for (const entry of controller.stack) {
      const item = document.createElement("li");
      item.textContent = `${entry.direction} @ ${entry.alpha}`;
      stackList.appendChild(item);
    }
  }

  controller.subscribe(render);
  render();
  return { controller, root };
}

function buildSlider(
  info: DirectionInfo,
  controller: SessionController,
  guard: (p: Promise<unknown>) => void,
): HTMLElement {
  const row = document.createElement("div");
  row.className = "slider-row";
  row.innerHTML = `
    <label>${info.name} <small>(${info.part})</small></label>
    <input type="range" min="${SLIDER_MIN}" max="${SLIDER_MAX}" step="${SLIDER_STEP}" value="0"
           data-testid="slider-${info.name}" />
    <output>0</output>
  `;
  const slider = row.querySelector<HTMLInputElement>("input")!;
  const output = row.querySelector<HTMLOutputElement>("output")!;
  slider.addEventListener("input", () => {
    output.value = slider.value;
    controller.sliderInput(info.name, Number(slider.value));
  });
  // range inputs fire "change" when the handle is released
  slider.addEventListener("change", () => {
    const alpha = Number(slider.value);
    guard(controller.sliderRelease(info.name, alpha));
    if (alpha === 0) output.value = "0";
  });
  return row;
}
