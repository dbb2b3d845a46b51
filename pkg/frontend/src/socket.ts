/** Reconnecting WebSocket feeding the ViewModel. */

import { Command, serializeCommand } from './protocol';
import { ViewModel } from './viewmodel';

export class SandboxSocket {
  private ws: WebSocket | null = null;
  private retryMs = 500;
  private stopped = false;

  constructor(private url: string, private vm: ViewModel) {}

  connect(): void {
    if (this.stopped) return;
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.vm.markOpen();
      this.retryMs = 500;
    };
    ws.onmessage = (ev) => {
      this.vm.ingest(String(ev.data), performance.now());
    };
    ws.onclose = () => {
      this.vm.markClosed();
      if (!this.stopped) {
        this.retryMs = Math.min(this.retryMs * 2, 5000);
        setTimeout(() => this.connect(), this.retryMs);
      }
    };
    ws.onerror = () => {
      ws.close();
    };
  }

  send(cmd: Command): boolean {
    if (this.ws === null || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(serializeCommand(cmd));
    return true;
  }

  close(): void {
    this.stopped = true;
    this.ws?.close();
  }
}
