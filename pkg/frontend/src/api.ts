// Typed client for the rating-session HTTP API. The fetch implementation is
// injectable so tests can run against an in-memory fixture service.

export type Label = 'real' | 'synthetic';

export type TestKind =
  | 'crop32_plain'
  | 'crop32_normal'
  | 'full256_plain'
  | 'full256_normal';

export interface CreateSessionResponse {
  session_id: string;
  test_kind: TestKind;
  total_items: number;
}

export interface NextItemResponse {
  done: false;
  item_id: string;
  index: number;
  total: number;
  image_url: string;
}

export interface NextDoneResponse {
  done: true;
  answered: number;
  total: number;
}

export type NextResponse = NextItemResponse | NextDoneResponse;

export interface RecordResponseResult {
  recorded: boolean;
  answered: number;
  total: number;
  complete: boolean;
}

export interface MatrixResponse {
  session_id: string;
  test_kind: TestKind;
  accuracy: number;
  real_selected_as_real: number;
  real_as_synt: number;
  synt_as_real: number;
  synt_as_synt: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        detail = body.detail ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return resp.json() as Promise<T>;
  }

  createSession(testKind: TestKind, nEach: number, seed?: number): Promise<CreateSessionResponse> {
    return this.request<CreateSessionResponse>('/sessions', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ test_kind: testKind, n_each: nEach, seed }),
    });
  }

  next(sessionId: string): Promise<NextResponse> {
    return this.request<NextResponse>(`/sessions/${sessionId}/next`);
  }

  submitResponse(sessionId: string, itemId: string, label: Label): Promise<RecordResponseResult> {
    return this.request<RecordResponseResult>(`/sessions/${sessionId}/responses`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ item_id: itemId, label }),
    });
  }

  finalize(sessionId: string): Promise<MatrixResponse> {
    return this.request<MatrixResponse>(`/sessions/${sessionId}/finalize`, {
      method: 'POST',
    });
  }

  report(sessionId: string): Promise<MatrixResponse> {
    return this.request<MatrixResponse>(`/sessions/${sessionId}/report`);
  }
}
