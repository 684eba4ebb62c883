/**
 * Trailing-edge rate limiter for slice requests.
 *
 * Calls pass through immediately when the budget allows, otherwise the
 * *latest* call is queued and fired when the interval elapses (stale
 * intermediate calls are dropped — the server only ever needs the most
 * recent orientation).  With the default interval of 50 ms the request
 * rate never exceeds 20 per second.
 */

export type Clock = () => number;
export type Scheduler = (fn: () => void, ms: number) => unknown;

export class RateLimiter<T> {
  private lastFired = -Infinity;
  private queued: T | null = null;
  private timerActive = false;

  constructor(
    private readonly fire: (arg: T) => void,
    private readonly intervalMs = 50,
    private readonly now: Clock = () => Date.now(),
    private readonly schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
  ) {}

  request(arg: T): void {
    const t = this.now();
    if (!this.timerActive && t - this.lastFired >= this.intervalMs) {
      this.lastFired = t;
      this.fire(arg);
      return;
    }
    this.queued = arg; // newer call replaces any queued one
    if (!this.timerActive) {
      this.timerActive = true;
      const wait = Math.max(0, this.intervalMs - (t - this.lastFired));
      this.schedule(() => this.flush(), wait);
    }
  }

  private flush(): void {
    this.timerActive = false;
    if (this.queued === null) return;
    const arg = this.queued;
    this.queued = null;
    this.lastFired = this.now();
    this.fire(arg);
  }
}
