// Typed client for the annotation-service JSON API.

export type PairChoice = 'A' | 'B' | 'C'

export interface QueryPayload {
  query_id: string
  kind: 'pairwise' | 'tuple'
  nodes: string[]
  descriptions: string[]
  context: string
  is_tiebreak: boolean
}

export interface ResolvedPair {
  pair: [string, string]
  votes: Record<string, number>
  resolved: PairChoice | null
  resolved_by: string
}

export interface Progress {
  status: 'open' | 'done' | 'failed' | 'closed'
  method: string
  graph: string
  answered: number
  total: number
  ties: number
  resolved_pairs: ResolvedPair[]
  error: string | null
}

export interface NextResponse {
  query: QueryPayload | null
  progress: Progress
}

export interface SessionReport {
  order: string[] | null
  isolated: string[]
  final_edges: [string, string][] | null
  ties: number
  calls: Record<string, number>
}

export interface CloseResponse {
  status: string
  report: SessionReport | null
  transcript: unknown[]
}

export type Verdict = { choice: PairChoice } | { edges: [string, string][] }

export type SubmitResult =
  | { ok: true }
  | { ok: false; status: number; cycle?: string[]; detail?: string }

export interface SessionApi {
  next(waitSeconds: number): Promise<NextResponse>
  submit(queryId: string, verdict: Verdict): Promise<SubmitResult>
  progress(): Promise<Progress>
  close(): Promise<CloseResponse>
}

export class ApiClient implements SessionApi {
  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly token: string = '',
  ) {}

  private headers(): Record<string, string> {
    const out: Record<string, string> = { 'Content-Type': 'application/json' }
    if (this.token) {
      out['Authorization'] = `Bearer ${this.token}`
    }
    return out
  }

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, '')}/sessions/${this.sessionId}${path}`
  }

  static async createSession(
    baseUrl: string,
    body: { graph: string; method?: string; tiebreak?: string },
    token = '',
  ): Promise<{ id: string; total: number }> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' }
    if (token) headers['Authorization'] = `Bearer ${token}`
    const response = await fetch(`${baseUrl.replace(/\/$/, '')}/sessions`, {
      method: 'POST',
      headers,
      body: JSON.stringify(body),
    })
    if (!response.ok) {
      throw new Error(`create session failed: ${response.status}`)
    }
    return response.json()
  }

  async next(waitSeconds: number): Promise<NextResponse> {
    const response = await fetch(this.url(`/next?wait=${waitSeconds}`), {
      headers: this.headers(),
    })
    if (!response.ok) {
      throw new Error(`next failed: ${response.status}`)
    }
    return response.json()
  }

  async submit(queryId: string, verdict: Verdict): Promise<SubmitResult> {
    const response = await fetch(this.url('/answers'), {
      method: 'POST',
      headers: this.headers(),
      body: JSON.stringify({ query_id: queryId, verdict }),
    })
    if (response.ok) {
      return { ok: true }
    }
    let cycle: string[] | undefined
    let detail: string | undefined
    try {
      const body = await response.json()
      if (body && typeof body.detail === 'object' && body.detail?.cycle) {
        cycle = body.detail.cycle
      } else if (body && typeof body.detail === 'string') {
        detail = body.detail
      }
    } catch {
      // non-JSON error body; status code is enough
    }
    return { ok: false, status: response.status, cycle, detail }
  }

  async progress(): Promise<Progress> {
    const response = await fetch(this.url('/progress'), { headers: this.headers() })
    if (!response.ok) {
      throw new Error(`progress failed: ${response.status}`)
    }
    return response.json()
  }

  async close(): Promise<CloseResponse> {
    const response = await fetch(this.url('/close'), {
      method: 'POST',
      headers: this.headers(),
    })
    if (!response.ok) {
      throw new Error(`close failed: ${response.status}`)
    }
    return response.json()
  }
}
