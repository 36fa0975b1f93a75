/** Job polling: 1s interval by default, cancellable on navigation. */
import type { Api, JobHandle } from './api.js';

export class JobPoller {
  private timers = new Set<ReturnType<typeof setInterval>>();

  constructor(
    private readonly api: Api,
    private readonly intervalMs: number = 1000,
  ) {}

  /** Poll until the job reaches a terminal state; onUpdate fires per tick. */
  track(job: JobHandle, onUpdate: (job: JobHandle) => void): Promise<JobHandle> {
    onUpdate(job);
    if (job.state === 'done' || job.state === 'failed') return Promise.resolve(job);
    return new Promise((resolve, reject) => {
      const timer = setInterval(async () => {
        let latest: JobHandle;
        try {
          latest = await this.api.getJob(job.job_id);
        } catch (err) {
          clearInterval(timer);
          this.timers.delete(timer);
          reject(err);
          return;
        }
        onUpdate(latest);
        if (latest.state === 'done' || latest.state === 'failed') {
          clearInterval(timer);
          this.timers.delete(timer);
          resolve(latest);
        }
      }, this.intervalMs);
      this.timers.add(timer);
    });
  }

  /** Cancel all in-flight polling (used when the user navigates away). */
  cancelAll(): void {
    for (const timer of this.timers) clearInterval(timer);
    this.timers.clear();
  }
}
