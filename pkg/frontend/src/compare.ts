// Before/after viewer with a draggable divider: the left portion shows the
// session's base render, the right portion the current edited render.
// Localized edits are judged by what did NOT change, so both images stay
// pixel-aligned and only the clip width moves.

export interface Comparison {
  setImages(beforeSrc: string, afterSrc: string): void;
  setPercent(pct: number): void;
  readonly before: HTMLImageElement;
  readonly after: HTMLImageElement;
}

export function createComparison(container: HTMLElement): Comparison {
  container.innerHTML = `
    <div class="compare-wrap" data-testid="compare">
      <img class="compare-before" alt="before" data-testid="image-before" />
      <div class="compare-clip">
        <img class="compare-after" alt="after" data-testid="image-after" />
      </div>
      <div class="compare-divider" data-testid="compare-divider"><div class="compare-handle"></div></div>
      <span class="compare-label compare-label-left">base</span>
      <span class="compare-label compare-label-right">edited</span>
    </div>
  `;
  const wrap = container.querySelector<HTMLDivElement>(".compare-wrap")!;
  const before = container.querySelector<HTMLImageElement>(".compare-before")!;
  const after = container.querySelector<HTMLImageElement>(".compare-after")!;
  const clip = container.querySelector<HTMLDivElement>(".compare-clip")!;
  const divider = container.querySelector<HTMLDivElement>(".compare-divider")!;

  let pct = 50;

  function setPercent(next: number): void {
    pct = Math.max(0, Math.min(100, next));
    divider.style.left = `${pct}%`;
    clip.style.left = `${pct}%`;
    clip.style.width = `${100 - pct}%`;
    // the after image stays aligned with the before image under the clip
    after.style.marginLeft = `-${pct}%`;
  }

  function percentFromEvent(event: { clientX: number }): number {
    const rect = wrap.getBoundingClientRect();
    if (rect.width === 0) return pct;
    return ((event.clientX - rect.left) / rect.width) * 100;
  }

  let dragging = false;
  wrap.addEventListener("pointerdown", (event) => {
    dragging = true;
    if (typeof wrap.setPointerCapture === "function") {
      wrap.setPointerCapture(event.pointerId);
    }
    setPercent(percentFromEvent(event));
  });
  wrap.addEventListener("pointermove", (event) => {
    if (dragging) setPercent(percentFromEvent(event));
  });
  wrap.addEventListener("pointerup", () => {
    dragging = false;
  });

  setPercent(pct);
  return {
    before,
    after,
    setImages(beforeSrc, afterSrc) {
      if (before.src !== beforeSrc) before.src = beforeSrc;
      if (after.src !== afterSrc) after.src = afterSrc;
    },
    setPercent,
  };
}
