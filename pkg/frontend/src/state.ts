// Session state machine: poll -> edit -> submit -> summary.
//
// The triplet editor refuses to enter a cyclic configuration, so the
// client can never send a verdict the server would reject with 422; the
// 422 branch below is kept as a defensive fallback (e.g. a hand-crafted
// request) and surfaces the server's cycle witness.

import type {
  PairChoice,
  Progress,
  QueryPayload,
  SessionApi,
  SessionReport,
  Verdict,
} from './api'
import { Edge, findCycle } from './cycles'

export type Phase = 'loading' | 'question' | 'summary' | 'failed'

export type PairState = 'none' | 'forward' | 'backward'

export function pairKey(a: string, b: string): string {
  return a < b ? `${a}|${b}` : `${b}|${a}`
}

export class AnnotationSession {
  phase: Phase = 'loading'
  query: QueryPayload | null = null
  progress: Progress | null = null
  report: SessionReport | null = null
  error: string | null = null
  highlightedCycle: string[] = []
  selectedChoice: PairChoice | null = null
  private edgeStates = new Map<string, { pair: [string, string]; state: PairState }>()

  constructor(private readonly api: SessionApi, private readonly waitSeconds = 20) {}

  /** All pairs of the current tuple in display order. */
  pairs(): [string, string][] {
    if (!this.query || this.query.kind !== 'tuple') return []
    const out: [string, string][] = []
    const nodes = this.query.nodes
    for (let i = 0; i < nodes.length; i++) {
      for (let j = i + 1; j < nodes.length; j++) {
        out.push([nodes[i], nodes[j]])
      }
    }
    return out
  }

  pairState(a: string, b: string): PairState {
    return this.edgeStates.get(pairKey(a, b))?.state ?? 'none'
  }

  edges(): Edge[] {
    const out: Edge[] = []
    for (const { pair, state } of this.edgeStates.values()) {
      if (state === 'forward') out.push([pair[0], pair[1]])
      if (state === 'backward') out.push([pair[1], pair[0]])
    }
    return out
  }

  /**
   * Cycle a pair through none -> forward -> backward -> none, skipping any
   * state that would make the mini-graph cyclic.
   */
  toggleEdge(a: string, b: string): PairState {
    if (!this.query || this.query.kind !== 'tuple') {
      throw new Error('no tuple query active')
    }
    const key = pairKey(a, b)
    const entry = this.edgeStates.get(key) ?? { pair: [a, b] as [string, string], state: 'none' as PairState }
    const ordered: PairState[] = ['none', 'forward', 'backward']
    let state = entry.state
    for (let step = 0; step < ordered.length; step++) {
      state = ordered[(ordered.indexOf(state) + 1) % ordered.length]
      this.edgeStates.set(key, { pair: entry.pair, state })
      if (!findCycle(this.query.nodes, this.edges())) {
        this.highlightedCycle = []
        return state
      }
    }
    // All alternatives cycled (cannot happen with three states); restore.
    this.edgeStates.set(key, entry)
    return entry.state
  }

  selectChoice(choice: PairChoice): void {
    if (!this.query || this.query.kind !== 'pairwise') {
      throw new Error('no pairwise query active')
    }
    this.selectedChoice = choice
  }

  canSubmit(): boolean {
    if (!this.query) return false
    if (this.query.kind === 'pairwise') return this.selectedChoice !== null
    return findCycle(this.query.nodes, this.edges()) === null
  }

  currentVerdict(): Verdict {
    if (!this.query) throw new Error('nothing to submit')
    if (this.query.kind === 'pairwise') {
      if (!this.selectedChoice) throw new Error('no choice selected')
      return { choice: this.selectedChoice }
    }
    return { edges: this.edges() }
  }

  async refresh(): Promise<void> {
    try {
      const { query, progress } = await this.api.next(this.waitSeconds)
      this.progress = progress
      if (query) {
        this.query = query
        this.phase = 'question'
        this.selectedChoice = null
        this.edgeStates = new Map()
        this.highlightedCycle = []
        return
      }
      if (progress.status === 'failed') {
        this.phase = 'failed'
        this.error = progress.error
        return
      }
      if (progress.status === 'open') {
        // Pipeline is between queries; poll again on the next tick.
        this.phase = 'loading'
        return
      }
      const closed = await this.api.close()
      this.report = closed.report
      this.phase = 'summary'
    } catch (err) {
      this.phase = 'failed'
      this.error = err instanceof Error ? err.message : String(err)
    }
  }

  async submit(): Promise<boolean> {
    if (!this.query || !this.canSubmit()) return false
    const result = await this.api.submit(this.query.query_id, this.currentVerdict())
    if (!result.ok) {
      if (result.status === 422 && result.cycle) {
        this.highlightedCycle = result.cycle
        return false
      }
      if (result.status === 409) {
        // Someone answered first; move on.
        await this.refresh()
        return false
      }
      this.phase = 'failed'
      this.error = result.detail ?? `submit failed with ${result.status}`
      return false
    }
    this.query = null
    await this.refresh()
    return true
  }
}
