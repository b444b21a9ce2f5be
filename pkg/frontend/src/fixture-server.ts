// In-memory fixture implementing the rating-service HTTP contract, used by
// the test harness. Payload shapes mirror the real service exactly; ground
// truth stays private until finalize.

import { Label, MatrixResponse, TestKind } from './api.js';

interface FixtureItem {
  item_id: string;
  ground_truth: Label;
}

interface Session {
  id: string;
  test_kind: TestKind;
  items: FixtureItem[];
  responses: Map<string, Label>;
  finalized: MatrixResponse | null;
}

export interface AuditEvent {
  event: 'response';
  item_id: string;
  label: Label;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0; a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export class FixtureService {
  private sessions = new Map<string, Session>();
  private counter = 0;
  readonly auditLogs = new Map<string, AuditEvent[]>();

  constructor(private readonly poolSize = 200) {}

  private jsonResponse(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { 'content-type': 'application/json' },
    });
  }

  createSession(testKind: TestKind, nEach: number, seed: number): Session {
    if (nEach > this.poolSize) throw new Error('pool too small');
    const rng = mulberry32(seed);
    const items: FixtureItem[] = [];
    for (let i = 0; i < nEach; i++) items.push({ item_id: `item_r${i}`, ground_truth: 'real' });
    for (let i = 0; i < nEach; i++) items.push({ item_id: `item_s${i}`, ground_truth: 'synthetic' });
    for (let i = items.length - 1; i > 0; i--) {
      const j = Math.floor(rng() * (i + 1));
      [items[i], items[j]] = [items[j], items[i]];
    }
    const session: Session = {
      id: `fixture_${this.counter++}`,
      test_kind: testKind,
      items,
      responses: new Map(),
      finalized: null,
    };
    this.sessions.set(session.id, session);
    this.auditLogs.set(session.id, []);
    return session;
  }

  // The matrix the service itself would report; used by tests as the oracle.
  expectedMatrix(sessionId: string): MatrixResponse {
    const s = this.sessions.get(sessionId);
    if (!s) throw new Error('unknown session');
    let rr = 0, rs = 0, sr = 0, ss = 0;
    for (const item of s.items) {
      const resp = s.responses.get(item.item_id);
      if (resp === undefined) throw new Error('incomplete');
      if (item.ground_truth === 'real') resp === 'real' ? rr++ : rs++;
      else resp === 'real' ? sr++ : ss++;
    }
    return {
      session_id: sessionId,
      test_kind: s.test_kind,
      accuracy: (rr + ss) / s.items.length,
      real_selected_as_real: rr,
      real_as_synt: rs,
      synt_as_real: sr,
      synt_as_synt: ss,
    };
  }

  private currentItem(s: Session): FixtureItem | null {
    return s.items.find((it) => !s.responses.has(it.item_id)) ?? null;
  }

  handle(method: string, path: string, body?: unknown): Response {
    const create = path.match(/^\/sessions$/);
    if (create && method === 'POST') {
      const b = body as { test_kind: TestKind; n_each: number; seed?: number };
      const session = this.createSession(b.test_kind, b.n_each, b.seed ?? 1);
      return this.jsonResponse(200, {
        session_id: session.id,
        test_kind: session.test_kind,
        total_items: session.items.length,
      });
    }
    const m = path.match(/^\/sessions\/([^/]+)(\/.*)?$/);
    if (!m) return this.jsonResponse(404, { detail: 'not found' });
    const session = this.sessions.get(m[1]);
    if (!session) return this.jsonResponse(404, { detail: `unknown session ${m[1]}` });
    const rest = m[2] ?? '';

    if (rest === '/next' && method === 'GET') {
      const item = this.currentItem(session);
      if (item === null) {
        return this.jsonResponse(200, {
          done: true, answered: session.responses.size, total: session.items.length,
        });
      }
      return this.jsonResponse(200, {
        done: false,
        item_id: item.item_id,
        index: session.responses.size,
        total: session.items.length,
        image_url: `/sessions/${session.id}/items/${item.item_id}/image`,
      });
    }
    if (rest.endsWith('/image') && method === 'GET') {
      return new Response(new Uint8Array([0x89, 0x50, 0x4e, 0x47]), {
        status: 200, headers: { 'content-type': 'image/png' },
      });
    }
    if (rest === '/responses' && method === 'POST') {
      const b = body as { item_id: string; label: Label };
      if (session.finalized) return this.jsonResponse(409, { detail: 'finalized' });
      if (b.label !== 'real' && b.label !== 'synthetic') {
        return this.jsonResponse(409, { detail: 'bad label' });
      }
      if (session.responses.has(b.item_id)) {
        return this.jsonResponse(409, { detail: `item ${b.item_id} already answered` });
      }
      const current = this.currentItem(session);
      if (current === null || current.item_id !== b.item_id) {
        return this.jsonResponse(409, { detail: 'out-of-order answer' });
      }
      session.responses.set(b.item_id, b.label);
      this.auditLogs.get(session.id)!.push({ event: 'response', item_id: b.item_id, label: b.label });
      return this.jsonResponse(200, {
        recorded: true,
        answered: session.responses.size,
        total: session.items.length,
        complete: session.responses.size === session.items.length,
      });
    }
    if (rest === '/finalize' && method === 'POST') {
      if (session.finalized) return this.jsonResponse(200, session.finalized);
      if (session.responses.size !== session.items.length) {
        return this.jsonResponse(409, { detail: 'incomplete session' });
      }
      session.finalized = this.expectedMatrix(session.id);
      return this.jsonResponse(200, session.finalized);
    }
    if (rest === '/report' && method === 'GET') {
      if (!session.finalized) return this.jsonResponse(409, { detail: 'not finalized' });
      return this.jsonResponse(200, session.finalized);
    }
    return this.jsonResponse(404, { detail: 'not found' });
  }

  // Fetch-compatible adapter for injecting into the ApiClient.
  asFetch(): (url: string, init?: RequestInit) => Promise<Response> {
    return async (url: string, init?: RequestInit) => {
      const path = url.replace(/^https?:\/\/[^/]+/, '');
      const method = init?.method ?? 'GET';
      const body = init?.body ? JSON.parse(init.body as string) : undefined;
      return this.handle(method, path, body);
    };
  }
}
