import { Hud } from './hud';
import { SandboxScene } from './scene';
import { SandboxSocket } from './socket';
import { ViewModel } from './viewmodel';

function socketUrl(): string {
  const override = new URLSearchParams(window.location.search).get('server');
  if (override !== null && override !== '') {
    return override.startsWith('ws') ? override : `ws://${override}/ws`;
  }
  if (window.location.protocol.startsWith('http') && window.location.host !== '') {
    const scheme = window.location.protocol === 'https:' ? 'wss' : 'ws';
    return `${scheme}://${window.location.host}/ws`;
  }
  return 'ws://127.0.0.1:8000/ws';
}

function start(): void {
  const app = document.getElementById('app');
  const hudRoot = document.getElementById('hud');
  if (app === null || hudRoot === null) {
    throw new Error('missing #app or #hud container');
  }

  const vm = new ViewModel();
  const scene = new SandboxScene(app, vm);
  const hud = new Hud(hudRoot, vm);
  const socket = new SandboxSocket(socketUrl(), vm);
  socket.connect();

  const frame = (): void => {
    for (const cmd of vm.flushCommands()) {
      socket.send(cmd);
    }
    scene.render(vm.latest);
    hud.update(performance.now());
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

start();
