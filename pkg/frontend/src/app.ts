// DOM bootstrap: one image at a time, keyboard-only judging (R / S to pick,
// Enter to confirm), zoom/rotate controls, matrix after finalize. The four
// test kinds run as an ordered playlist.

import { ApiClient, Label, TestKind } from './api.js';
import { RatingClient, renderMatrix } from './client.js';
import { INITIAL_VIEW, ViewTransform, cssTransform, resetView, rotate, zoomIn, zoomOut } from './view-state.js';

const PLAYLIST: TestKind[] = [
  'crop32_plain', 'crop32_normal', 'full256_plain', 'full256_normal',
];

interface Elements {
  image: HTMLImageElement;
  progress: HTMLElement;
  status: HTMLElement;
  realBtn: HTMLButtonElement;
  syntBtn: HTMLButtonElement;
  confirmBtn: HTMLButtonElement;
  matrixHost: HTMLElement;
}

export class App {
  private client: RatingClient;
  private view: ViewTransform = { ...INITIAL_VIEW };
  private selection: Label | null = null;
  private imageLoaded = false;
  private playlistIndex = 0;

  constructor(private readonly els: Elements, api: ApiClient,
              private readonly nEach: number = 50) {
    this.client = new RatingClient(api);
  }

  async startPlaylist(): Promise<void> {
    this.playlistIndex = 0;
    await this.startCurrentTest();
  }

  private async startCurrentTest(): Promise<void> {
    const kind = PLAYLIST[this.playlistIndex];
    this.els.status.textContent = `Test ${this.playlistIndex + 1} of ${PLAYLIST.length}: ${kind}`;
    try {
      const progress = await this.client.start(kind, this.nEach);
      this.showItem(progress.item?.image_url ?? null, progress.answered, progress.total);
    } catch (err) {
      this.els.status.textContent = `could not start ${kind}: ${String(err)}`;
    }
  }

  private showItem(imageUrl: string | null, answered: number, total: number): void {
    this.els.progress.textContent = `${answered} of ${total}`;
    this.selection = null;
    this.imageLoaded = false;
    this.updateButtons();
    this.view = resetView();
    this.applyView();
    if (imageUrl === null) {
      void this.finishTest();
      return;
    }
    this.els.image.onload = () => {
      this.imageLoaded = true;
      this.updateButtons();
    };
    this.els.image.src = imageUrl;
  }

  private async finishTest(): Promise<void> {
    const matrix = await this.client.finalize();
    this.els.matrixHost.innerHTML = renderMatrix(matrix);
    this.playlistIndex += 1;
    if (this.playlistIndex < PLAYLIST.length) {
      await this.startCurrentTest();
    } else {
      this.els.status.textContent = 'all tests complete';
    }
  }

  select(label: Label): void {
    if (!this.imageLoaded) return;
    this.selection = label;
    this.updateButtons();
  }

  async confirm(): Promise<void> {
    if (this.selection === null || !this.imageLoaded) return;
    const progress = await this.client.submit(this.selection);
    this.showItem(progress.item?.image_url ?? null, progress.answered, progress.total);
  }

  private updateButtons(): void {
    this.els.realBtn.disabled = !this.imageLoaded;
    this.els.syntBtn.disabled = !this.imageLoaded;
    this.els.confirmBtn.disabled = !this.imageLoaded || this.selection === null;
    this.els.realBtn.classList.toggle('selected', this.selection === 'real');
    this.els.syntBtn.classList.toggle('selected', this.selection === 'synthetic');
  }

  private applyView(): void {
    const css = cssTransform(this.view);
    this.els.image.style.transform = css.transform;
    this.els.image.style.imageRendering = css.imageRendering;
  }

  handleKey(key: string): void {
    switch (key.toLowerCase()) {
      case 'r': this.select('real'); break;
      case 's': this.select('synthetic'); break;
      case 'enter': void this.confirm(); break;
      case '+': case '=': this.view = zoomIn(this.view); this.applyView(); break;
      case '-': this.view = zoomOut(this.view); this.applyView(); break;
      case 'o': this.view = rotate(this.view); this.applyView(); break;
    }
  }
}

export function mount(document: Document, baseUrl: string): App {
  const byId = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;
  const els: Elements = {
    image: byId<HTMLImageElement>('item-image'),
    progress: byId('progress'),
    status: byId('status'),
    realBtn: byId<HTMLButtonElement>('btn-real'),
    syntBtn: byId<HTMLButtonElement>('btn-synt'),
    confirmBtn: byId<HTMLButtonElement>('btn-confirm'),
    matrixHost: byId('matrix'),
  };
  const app = new App(els, new ApiClient(baseUrl));
  els.realBtn.addEventListener('click', () => app.select('real'));
  els.syntBtn.addEventListener('click', () => app.select('synthetic'));
  els.confirmBtn.addEventListener('click', () => void app.confirm());
  document.addEventListener('keydown', (e) => app.handleKey(e.key));
  return app;
}

declare global {
  interface Window { vttApp?: App }
}

if (typeof window !== 'undefined' && typeof document !== 'undefined'
    && document.getElementById('item-image')) {
  const base = (window as Window & { VTT_BASE_URL?: string }).VTT_BASE_URL ?? '';
  const app = mount(document, base);
  window.vttApp = app;
  void app.startPlaylist();
}
