/** Retry queue for submissions that failed at the network level. Items stay
 * visibly pending until the server accepts them. */

export type QueueState = "pending" | "saved" | "rejected";

interface QueuedItem {
  key: string;
  attempt: () => Promise<void>;
  onState: (state: QueueState, message?: string) => void;
}

export class RetryQueue {
  private items = new Map<string, QueuedItem>();
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly intervalMs = 5000,
    private readonly isRetryable: (error: unknown) => boolean = () => true,
  ) {}

  get pendingKeys(): string[] {
    return [...this.items.keys()];
  }

  enqueue(key: string, attempt: () => Promise<void>,
          onState: (state: QueueState, message?: string) => void): void {
    this.items.set(key, { key, attempt, onState });
    onState("pending");
    this.ensureTimer();
  }

  private ensureTimer(): void {
    if (this.timer === null && this.items.size > 0) {
      this.timer = setInterval(() => {
        void this.flush();
      }, this.intervalMs);
    }
  }

  private stopTimerIfIdle(): void {
    if (this.timer !== null && this.items.size === 0) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** Try every queued submission once; keep the still-failing ones queued. */
  async flush(): Promise<void> {
    for (const item of [...this.items.values()]) {
      try {
        await item.attempt();
        this.items.delete(item.key);
        item.onState("saved");
      } catch (error) {
        if (!this.isRetryable(error)) {
          this.items.delete(item.key);
          item.onState("rejected", error instanceof Error ? error.message : String(error));
        }
        // still retryable: stays queued and visibly pending
      }
    }
    this.stopTimerIfIdle();
  }
}
