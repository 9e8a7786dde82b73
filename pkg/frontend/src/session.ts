// Client-side session model: mirrors the server's edit stack, serializes
// requests (one in flight per session), coalesces slider movement through a
// trailing-edge debounce, and discards stale responses by sequence number.
//
// The mirror is always replayable: replaying `stack` against a fresh server
// session with the same seed reproduces `currentImage` byte for byte.

import { ApiClient, ApiError } from "./api";

export interface StackEntry {
  direction: string;
  alpha: number;
}

type Task = () => Promise<void>;

export class SessionController {
  sessionId = "";
  seed = 0;
  baseImage = "";
  currentImage = "";
  stack: StackEntry[] = [];
  redoStack: StackEntry[] = [];
  lastError: string | null = null;

  private queue: Task[] = [];
  private draining = false;
  private issuedSeq = 0;
  private appliedSeq = 0;
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private pendingSlider: StackEntry | null = null;
  private provisionalDirection: string | null = null;
  private idleResolvers: (() => void)[] = [];
  private listeners: (() => void)[] = [];

  constructor(
    private api: ApiClient,
    private debounceMs = 100,
  ) {}

  get pending(): boolean {
    return this.draining || this.queue.length > 0 || this.debounceTimer !== null;
  }

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  /** Resolves once no request is in flight and no slider update is pending. */
  whenIdle(): Promise<void> {
    if (!this.pending) return Promise.resolve();
    return new Promise((resolve) => this.idleResolvers.push(resolve));
  }

  private checkIdle(): void {
    if (!this.pending) {
      const resolvers = this.idleResolvers;
      this.idleResolvers = [];
      for (const fn of resolvers) fn();
    }
  }

  private nextSeq(): number {
    return ++this.issuedSeq;
  }

  /** Apply a server image iff it is newer than everything applied so far. */
  private applyImage(seq: number, image: string): boolean {
    if (seq <= this.appliedSeq) return false;
    this.appliedSeq = seq;
    this.currentImage = image;
    return true;
  }

  private enqueue(task: Task): Promise<void> {
    return new Promise((resolve, reject) => {
      this.queue.push(async () => {
        try {
          await task();
          resolve();
        } catch (err) {
          this.lastError = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
          this.provisionalDirection = null;
          reject(err);
        }
      });
      void this.drain();
    });
  }

  private async drain(): Promise<void> {
    if (this.draining) return;
    this.draining = true;
    try {
      while (this.queue.length > 0) {
        const task = this.queue.shift()!;
        try {
          await task();
        } catch {
          // error already recorded on the controller; keep serving the queue
        }
        this.notify();
      }
    } finally {
      this.draining = false;
      this.notify();
      this.checkIdle();
    }
  }

  async start(seed?: number): Promise<void> {
    await this.enqueue(async () => {
      const seq = this.nextSeq();
      const res = await this.api.createSession(seed);
      this.sessionId = res.session_id;
      this.seed = res.seed;
      this.baseImage = res.image;
      this.stack = [];
      this.redoStack = [];
      this.provisionalDirection = null;
      this.appliedSeq = 0;
      this.applyImage(seq, res.image);
    });
  }

  /** Commit an edit directly (calibration chips, programmatic edits). */
  pushEdit(direction: string, alpha: number): Promise<void> {
    return this.enqueue(async () => {
      const seq = this.nextSeq();
      const res = await this.api.pushEdit(this.sessionId, direction, alpha);
      this.stack.push({ direction, alpha });
      this.redoStack = [];
      this.applyImage(seq, res.image);
    });
  }

  undo(): Promise<void> {
    if (this.stack.length === 0) return Promise.resolve();
    return this.enqueue(async () => {
      if (this.stack.length === 0) return;
      const seq = this.nextSeq();
      const res = await this.api.popEdit(this.sessionId);
      const popped = this.stack.pop()!;
      this.redoStack.push(popped);
      this.provisionalDirection = null;
      this.applyImage(seq, res.image);
    });
  }

  redo(): Promise<void> {
    if (this.redoStack.length === 0) return Promise.resolve();
    return this.enqueue(async () => {
      const entry = this.redoStack.pop();
      if (!entry) return;
      const seq = this.nextSeq();
      const res = await this.api.pushEdit(this.sessionId, entry.direction, entry.alpha);
      this.stack.push(entry);
      this.applyImage(seq, res.image);
    });
  }

  /**
   * Slider movement during a drag. Debounced: only the latest value goes to
   * the server, replacing the drag's provisional top-of-stack entry.
   */
  sliderInput(direction: string, alpha: number): void {
    this.pendingSlider = { direction, alpha };
    if (this.debounceTimer === null) {
      this.debounceTimer = setTimeout(() => {
        this.debounceTimer = null;
        this.flushSlider();
      }, this.debounceMs);
    }
  }

  /** Slider released: commit the final value, or drop the entry at zero. */
  sliderRelease(direction: string, alpha: number): Promise<void> {
    if (this.debounceTimer !== null) {
      clearTimeout(this.debounceTimer);
      this.debounceTimer = null;
    }
    this.pendingSlider = null;
    return this.enqueue(async () => {
      await this.applySliderValue(direction, alpha);
      if (alpha === 0 && this.provisionalDirection === direction) {
        const seq = this.nextSeq();
        const res = await this.api.popEdit(this.sessionId);
        this.stack.pop();
        this.applyImage(seq, res.image);
      } else if (this.provisionalDirection === direction) {
        this.redoStack = [];
      }
      this.provisionalDirection = null;
    }).finally(() => this.checkIdle());
  }

  private flushSlider(): void {
    const update = this.pendingSlider;
    this.pendingSlider = null;
    if (!update) return;
    void this.enqueue(() => this.applySliderValue(update.direction, update.alpha)).catch(() => {});
  }

  private async applySliderValue(direction: string, alpha: number): Promise<void> {
    if (this.provisionalDirection === direction && this.stack.length > 0) {
      const seqPop = this.nextSeq();
      const popped = await this.api.popEdit(this.sessionId);
      this.stack.pop();
      this.applyImage(seqPop, popped.image);
    }
    const seq = this.nextSeq();
    const res = await this.api.pushEdit(this.sessionId, direction, alpha);
    this.stack.push({ direction, alpha });
    this.provisionalDirection = direction;
    this.applyImage(seq, res.image);
  }

  calibrate(direction: string, distance: number): Promise<{ alpha_neg: number; alpha_pos: number }> {
    return this.api.calibrate(this.sessionId, direction, distance);
  }
}
