/**
 * Last-write-wins request tracking.  Every outgoing slice request gets a
 * monotonically increasing sequence number; a response renders only if
 * no newer request has been issued since.  This replaces request
 * cancellation: simpler, and adequate at interactive latencies.
 */

export class SequenceTracker {
  private nextSeq = 0;
  private latestIssued = -1;
  private latestRendered = -1;

  /** Allocate the sequence number for a new outgoing request. */
  issue(): number {
    const seq = this.nextSeq++;
    this.latestIssued = seq;
    return seq;
  }

  /**
   * Should the response to request `seq` render?  True only when `seq`
   * is the most recent request and nothing newer has already rendered.
   * Marks it rendered when accepted.
   */
  accept(seq: number): boolean {
    if (seq !== this.latestIssued) return false; // superseded in flight
    if (seq <= this.latestRendered) return false; // duplicate delivery
    this.latestRendered = seq;
    return true;
  }

  /** True while a request newer than the last rendered one is in flight. */
  pending(): boolean {
    return this.latestIssued > this.latestRendered;
  }
}
