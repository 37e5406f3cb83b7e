// Directed-cycle detection for the mini-graph editor.

export type Edge = [string, string]

/** First directed cycle found, as a node sequence, or null if acyclic. */
export function findCycle(nodes: string[], edges: Edge[]): string[] | null {
  const successors = new Map<string, string[]>()
  for (const node of nodes) {
    successors.set(node, [])
  }
  for (const [src, dst] of edges) {
    successors.get(src)?.push(dst)
  }
  const state = new Map<string, 'visiting' | 'done'>()
  const stack: string[] = []

  const visit = (node: string): string[] | null => {
    state.set(node, 'visiting')
    stack.push(node)
    for (const nxt of successors.get(node) ?? []) {
      const seen = state.get(nxt)
      if (seen === 'visiting') {
        return stack.slice(stack.indexOf(nxt))
      }
      if (seen === undefined) {
        const cycle = visit(nxt)
        if (cycle) return cycle
      }
    }
    stack.pop()
    state.set(node, 'done')
    return null
  }

  for (const node of nodes) {
    if (!state.has(node)) {
      const cycle = visit(node)
      if (cycle) return cycle
    }
  }
  return null
}

export function isAcyclic(nodes: string[], edges: Edge[]): boolean {
  return findCycle(nodes, edges) === null
}
