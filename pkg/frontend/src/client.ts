// Session driver: mirrors the service state machine on the client side.
// Every answer waits for service acknowledgment (no optimistic UI); after a
// network failure the current item is re-fetched so a reconnect resumes at
// the correct cursor without duplicating responses.

import { ApiClient, ApiError, Label, MatrixResponse, NextItemResponse, TestKind } from './api.js';

export interface SessionProgress {
  item: NextItemResponse | null;
  answered: number;
  total: number;
  complete: boolean;
}

export class RatingClient {
  private sessionId: string | null = null;
  private current: NextItemResponse | null = null;
  private answered = 0;
  private total = 0;

  constructor(private readonly api: ApiClient) {}

  get id(): string {
    if (this.sessionId === null) throw new Error('no active session');
    return this.sessionId;
  }

  async start(testKind: TestKind, nEach: number, seed?: number): Promise<SessionProgress> {
    const created = await this.api.createSession(testKind, nEach, seed);
    this.sessionId = created.session_id;
    this.total = created.total_items;
    this.answered = 0;
    return this.refresh();
  }

  // Resume an existing session (e.g. after a reload or dropped connection).
  async resume(sessionId: string): Promise<SessionProgress> {
    this.sessionId = sessionId;
    return this.refresh();
  }

  async refresh(): Promise<SessionProgress> {
    const next = await this.api.next(this.id);
    if (next.done) {
      this.current = null;
      this.answered = next.answered;
      this.total = next.total;
    } else {
      this.current = next;
      this.answered = next.index;
      this.total = next.total;
    }
    return this.progress();
  }

  progress(): SessionProgress {
    return {
      item: this.current,
      answered: this.answered,
      total: this.total,
      complete: this.current === null && this.answered === this.total && this.total > 0,
    };
  }

  // Submit a judgment for the current item. A conflict (409: duplicate or
  // out-of-order after a reconnect) or a network error resolves by
  // re-fetching the cursor; the response is never blindly retried.
  async submit(label: Label): Promise<SessionProgress> {
    if (this.current === null) throw new Error('no item to answer');
    const itemId = this.current.item_id;
    try {
      const ack = await this.api.submitResponse(this.id, itemId, label);
      this.answered = ack.answered;
    } catch (err) {
      if (err instanceof ApiError && err.status !== 409) throw err;
      // 409 (duplicate / out-of-order after reconnect) or a network error:
      // the refresh below re-syncs the cursor without retrying blindly
    }
    return this.refresh();
  }

  async finalize(): Promise<MatrixResponse> {
    return this.api.finalize(this.id);
  }

  // Drive a whole session with a scripted rater (used by the replay harness).
  async runScripted(rater: (item: NextItemResponse) => Label): Promise<MatrixResponse> {
    let progress = this.progress();
    if (progress.item === null && !progress.complete) progress = await this.refresh();
    while (progress.item !== null) {
      progress = await this.submit(rater(progress.item));
    }
    return this.finalize();
  }
}

export function renderMatrix(matrix: MatrixResponse): string {
  const pct = (matrix.accuracy * 100).toFixed(0);
  return [
    `<table class="matrix" data-session="${matrix.session_id}">`,
    `<tr><th>Accuracy</th><th>Real as Real</th><th>Real as Synt</th>` +
      `<th>Synt as Real</th><th>Synt as Synt</th></tr>`,
    `<tr><td>${pct}%</td>` +
      `<td data-cell="real_selected_as_real">${matrix.real_selected_as_real}</td>` +
      `<td data-cell="real_as_synt">${matrix.real_as_synt}</td>` +
      `<td data-cell="synt_as_real">${matrix.synt_as_real}</td>` +
      `<td data-cell="synt_as_synt">${matrix.synt_as_synt}</td></tr>`,
    `</table>`,
  ].join('\n');
}
