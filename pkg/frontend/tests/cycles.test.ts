import { describe, expect, it } from 'vitest'

import { findCycle, isAcyclic } from '../src/cycles'

const NODES = ['A', 'B', 'C']

describe('findCycle', () => {
  it('accepts empty graphs', () => {
    expect(findCycle(NODES, [])).toBeNull()
  })

  it('accepts chains and colliders', () => {
    expect(findCycle(NODES, [['A', 'B'], ['B', 'C']])).toBeNull()
    expect(findCycle(NODES, [['A', 'C'], ['B', 'C']])).toBeNull()
  })

  it('reports a 3-cycle with its nodes', () => {
    const cycle = findCycle(NODES, [['A', 'B'], ['B', 'C'], ['C', 'A']])
    expect(cycle).not.toBeNull()
    expect(new Set(cycle!)).toEqual(new Set(NODES))
  })

  it('reports a 2-cycle', () => {
    const cycle = findCycle(NODES, [['A', 'B'], ['B', 'A']])
    expect(new Set(cycle!)).toEqual(new Set(['A', 'B']))
  })

  it('isAcyclic mirrors findCycle', () => {
    expect(isAcyclic(NODES, [['A', 'B']])).toBe(true)
    expect(isAcyclic(NODES, [['A', 'B'], ['B', 'A']])).toBe(false)
  })
})
