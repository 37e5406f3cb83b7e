// Browser bootstrap: configuration comes from URL query parameters
// (?session=...&token=...&base=...), one session per tab.

import { ApiClient } from './api'
import { AnnotationSession } from './state'
import { render } from './view'

function mount(root: HTMLElement): void {
  const params = new URLSearchParams(window.location.search)
  const sessionId = params.get('session')
  const token = params.get('token') ?? ''
  const base = params.get('base') ?? ''
  if (!sessionId) {
    root.innerHTML = '<p class="error">missing ?session=&lt;id&gt; parameter</p>'
    return
  }
  const client = new ApiClient(base, sessionId, token)
  const session = new AnnotationSession(client)

  const paint = () => {
    root.innerHTML = render(session)
  }

  const loop = async () => {
    await session.refresh()
    paint()
    if (session.phase === 'loading') {
      setTimeout(loop, 250)
    }
  }

  root.addEventListener('click', async (event) => {
    const target = event.target as HTMLElement
    const choiceButton = target.closest<HTMLElement>('button.choice')
    if (choiceButton?.dataset.choice) {
      session.selectChoice(choiceButton.dataset.choice as 'A' | 'B' | 'C')
      paint()
      return
    }
    const pairButton = target.closest<HTMLElement>('button.pair')
    if (pairButton?.dataset.a && pairButton.dataset.b) {
      session.toggleEdge(pairButton.dataset.a, pairButton.dataset.b)
      paint()
      return
    }
    if (target.closest('button.submit')) {
      await session.submit()
      paint()
      if (session.phase === 'loading') {
        setTimeout(loop, 250)
      }
    }
  })

  // Keyboard shortcuts keep pairwise answering fast: 1/2/3 pick A/B/C.
  window.addEventListener('keydown', (event) => {
    if (session.phase !== 'question' || session.query?.kind !== 'pairwise') return
    const mapping: Record<string, 'A' | 'B' | 'C'> = { '1': 'A', '2': 'B', '3': 'C' }
    const choice = mapping[event.key]
    if (choice) {
      session.selectChoice(choice)
      paint()
    }
  })

  void loop()
}

const root = document.getElementById('app')
if (root) {
  mount(root)
}
