// HTML renderers kept as pure string functions so they are testable
// without a DOM.

import type { AnnotationSession } from './state'
import { pairKey } from './state'

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
}

function nodeCard(name: string, description: string): string {
  const body = description
    ? `<details class="description"><summary>description</summary>${escapeHtml(description)}</details>`
    : ''
  return `<div class="card" data-node="${escapeHtml(name)}"><h3>${escapeHtml(name)}</h3>${body}</div>`
}

function progressLine(session: AnnotationSession): string {
  const p = session.progress
  if (!p) return ''
  return `<p class="progress">answered ${p.answered} of ${p.total} (ties so far: ${p.ties})</p>`
}

function pairwiseWidget(session: AnnotationSession): string {
  const query = session.query!
  const [x, y] = query.nodes
  const options: [string, string][] = [
    ['A', `${x} causes ${y}`],
    ['B', `${y} causes ${x}`],
    ['C', `no causal relation`],
  ]
  const buttons = options
    .map(([choice, label], index) => {
      const selected = session.selectedChoice === choice ? ' selected' : ''
      return (
        `<button class="choice${selected}" data-choice="${choice}">` +
        `<kbd>${index + 1}</kbd> ${choice}. ${escapeHtml(label)}</button>`
      )
    })
    .join('')
  return `<div class="choices">${buttons}</div>`
}

function tupleWidget(session: AnnotationSession): string {
  const rows = session
    .pairs()
    .map(([a, b]) => {
      const state = session.pairState(a, b)
      const arrow = state === 'forward' ? '&rarr;' : state === 'backward' ? '&larr;' : '&mdash;'
      const inCycle =
        session.highlightedCycle.includes(a) && session.highlightedCycle.includes(b)
      return (
        `<button class="pair${inCycle ? ' cycle' : ''}" data-pair="${escapeHtml(pairKey(a, b))}" ` +
        `data-a="${escapeHtml(a)}" data-b="${escapeHtml(b)}">` +
        `${escapeHtml(a)} ${arrow} ${escapeHtml(b)}</button>`
      )
    })
    .join('')
  const warning = session.highlightedCycle.length
    ? `<p class="cycle-warning">cycle: ${escapeHtml(session.highlightedCycle.join(' → '))}</p>`
    : ''
  return `<div class="pairs">${rows}</div>${warning}`
}

export function renderQuestion(session: AnnotationSession): string {
  const query = session.query
  if (!query) return '<p>waiting for the next query&hellip;</p>'
  const cards = query.nodes
    .map((name, i) => nodeCard(name, query.descriptions[i] ?? ''))
    .join('')
  const widget = query.kind === 'pairwise' ? pairwiseWidget(session) : tupleWidget(session)
  const tiebreak = query.is_tiebreak ? '<p class="tiebreak">tie-break question</p>' : ''
  const submitDisabled = session.canSubmit() ? '' : ' disabled'
  return [
    `<section class="query" data-query="${escapeHtml(query.query_id)}">`,
    query.context ? `<p class="context">${escapeHtml(query.context)}</p>` : '',
    tiebreak,
    `<div class="cards">${cards}</div>`,
    widget,
    `<button class="submit"${submitDisabled}>submit</button>`,
    progressLine(session),
    '</section>',
  ].join('')
}

export function renderSummary(session: AnnotationSession): string {
  const report = session.report
  if (!report) {
    return '<section class="summary"><p>session closed before completion.</p></section>'
  }
  const order = (report.order ?? [])
    .map((name, i) => `<li value="${i + 1}">${escapeHtml(name)}</li>`)
    .join('')
  const isolated = report.isolated.length
    ? `<p>undetermined (isolated) nodes: ${report.isolated.map(escapeHtml).join(', ')}</p>`
    : '<p>no isolated nodes.</p>'
  return [
    '<section class="summary">',
    '<h2>final causal order</h2>',
    `<ol>${order}</ol>`,
    isolated,
    `<p>tie-breaks used: ${report.ties}</p>`,
    '</section>',
  ].join('')
}

export function render(session: AnnotationSession): string {
  switch (session.phase) {
    case 'loading':
      return '<p class="loading">loading&hellip;</p>'
    case 'question':
      return renderQuestion(session)
    case 'summary':
      return renderSummary(session)
    case 'failed':
      return `<p class="error">session failed: ${escapeHtml(session.error ?? 'unknown error')}</p>`
  }
}
