/**
 * DOM overlay: connection banner, sim clock, stage timings, per-sphere
 * distance gauges, and the pause/resume/regularization controls.
 */

import { Snapshot } from './protocol';
import { ViewModel, activationColor } from './viewmodel';

const GAUGE_FULL_SCALE_M = 0.5;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className: string, parent: HTMLElement): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  parent.appendChild(node);
  return node;
}

export class Hud {
  private banner: HTMLDivElement;
  private clock: HTMLDivElement;
  private timings: HTMLDivElement;
  private gaugeRows: { bar: HTMLDivElement; label: HTMLDivElement }[] = [];
  private gauges: HTMLDivElement;
  private errorLine: HTMLDivElement;
  private regToggle: HTMLInputElement;

  constructor(root: HTMLElement, private vm: ViewModel) {
    this.banner = el('div', 'banner hidden', root);

    const panel = el('div', 'panel', root);
    this.clock = el('div', 'clock', panel);
    this.timings = el('div', 'timings', panel);

    const controls = el('div', 'controls', panel);
    const pause = el('button', '', controls);
    pause.textContent = 'pause';
    pause.onclick = () => vm.queueDiscreteCommand({ type: 'pause' });
    const resume = el('button', '', controls);
    resume.textContent = 'resume';
    resume.onclick = () => vm.queueDiscreteCommand({ type: 'resume' });
    const regLabel = el('label', 'reg', controls);
    this.regToggle = document.createElement('input');
    this.regToggle.type = 'checkbox';
    this.regToggle.checked = true;
    this.regToggle.onchange = () => vm.queueDiscreteCommand(
      { type: 'toggle_regularization', enabled: this.regToggle.checked });
    regLabel.appendChild(this.regToggle);
    regLabel.appendChild(document.createTextNode(' regularization'));

    const hint = el('div', 'hint', panel);
    hint.textContent = 'drag markers on the ground plane, hold Shift for height';

    this.gauges = el('div', 'gauges', panel);
    this.errorLine = el('div', 'error', panel);
  }

  update(nowMs: number): void {
    const status = this.vm.status(nowMs);
    if (this.vm.isStale(nowMs)) {
      this.banner.textContent = status === 'closed'
        ? 'connection closed, retrying' : 'snapshot stream stale';
      this.banner.classList.remove('hidden');
    } else {
      this.banner.classList.add('hidden');
    }

    const snap = this.vm.latest;
    if (snap === null) {
      this.clock.textContent = 'waiting for first snapshot';
      return;
    }
    this.clock.textContent = `t = ${snap.t.toFixed(3)} s`;
    const tm = snap.timings;
    this.timings.textContent =
      `clear ${tm.clear.toFixed(1)} / insert ${tm.insert.toFixed(1)} / `
      + `edt ${tm.edt.toFixed(1)} / solve ${tm.solve.toFixed(2)} ms`;
    this.updateGauges(snap);
    this.errorLine.textContent = this.vm.lastError ?? '';
  }

  private updateGauges(snap: Snapshot): void {
    while (this.gaugeRows.length < snap.spheres.length) {
      const row = el('div', 'gauge-row', this.gauges);
      const label = el('div', 'gauge-label', row);
      const track = el('div', 'gauge-track', row);
      const bar = el('div', 'gauge-bar', track);
      this.gaugeRows.push({ bar, label });
    }
    for (let i = 0; i < snap.spheres.length; i++) {
      const s = snap.spheres[i];
      const { bar, label } = this.gaugeRows[i];
      const candidates = [s.xc, s.xs].filter((d) => d >= 0);
      const dist = candidates.length > 0 ? Math.min(...candidates) : -1;
      label.textContent = dist >= 0 ? `${i}: ${dist.toFixed(2)} m` : `${i}: --`;
      const frac = dist >= 0 ? Math.min(1, dist / GAUGE_FULL_SCALE_M) : 1;
      bar.style.width = `${(frac * 100).toFixed(1)}%`;
      const col = activationColor(s.a);
      bar.style.background = `rgb(${Math.round(col.r * 255)}, `
        + `${Math.round(col.g * 255)}, ${Math.round(col.b * 255)})`;
    }
  }
}
