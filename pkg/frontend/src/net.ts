// Connection handling: command ids, acks, reconnection, latest-wins snapshots.

import {
  Command,
  NetworkMessage,
  ServerMessage,
  Snapshot,
  parseServerMessage,
  validateCommand,
} from "./protocol.js";

/** Monotone command ids; an id is never reused, even across retries. */
export class CommandTracker {
  private next = 1;
  private pendingIds = new Set<number>();

  allocate(): number {
    return this.next++;
  }

  markPending(id: number): void {
    this.pendingIds.add(id);
  }

  settle(id: number | null | undefined): boolean {
    if (id === null || id === undefined) return false;
    return this.pendingIds.delete(id);
  }

  pendingCount(): number {
    return this.pendingIds.size;
  }
}

/** One-slot mailbox: rendering always picks up the latest snapshot only. */
export class LatestMailbox<T> {
  private item: T | null = null;
  dropped = 0;

  post(item: T): void {
    if (this.item !== null) this.dropped++;
    this.item = item;
  }

  take(): T | null {
    const out = this.item;
    this.item = null;
    return out;
  }
}

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
}

export interface ClientHandlers {
  onNetwork?(msg: NetworkMessage): void;
  onSnapshot?(msg: Snapshot): void;
  onAck?(cmdId: number | null | undefined): void;
  onError?(msg: string, cmdId?: number | null): void;
  onDone?(worldHash: string): void;
  onStatus?(status: "connecting" | "open" | "closed"): void;
}

export class SteeringClient {
  readonly tracker = new CommandTracker();
  readonly snapshots = new LatestMailbox<Snapshot>();
  private socket: SocketLike | null = null;
  private closed = false;
  private reconnectDelay = 500;

  constructor(
    private readonly connect: () => SocketLike,
    private readonly handlers: ClientHandlers,
    private readonly schedule: (fn: () => void, ms: number) => void =
      (fn, ms) => setTimeout(fn, ms),
  ) {}

  open(): void {
    this.handlers.onStatus?.("connecting");
    const socket = this.connect();
    this.socket = socket;
    socket.onopen = () => {
      this.reconnectDelay = 500;
      this.handlers.onStatus?.("open");
    };
    socket.onmessage = (ev) => this.dispatch(ev.data);
    socket.onclose = () => {
      this.socket = null;
      this.handlers.onStatus?.("closed");
      if (!this.closed) {
        this.schedule(() => this.open(), this.reconnectDelay);
        this.reconnectDelay = Math.min(this.reconnectDelay * 2, 8000);
      }
    };
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }

  /** Validate, stamp a fresh cmd_id, send; returns the id or null. */
  send(command: Command): number | null {
    const problem = validateCommand(command);
    if (problem !== null) {
      this.handlers.onError?.(`refused locally: ${problem}`);
      return null;
    }
    if (this.socket === null) {
      this.handlers.onError?.("not connected");
      return null;
    }
    const id = this.tracker.allocate();
    const payload = { ...command, cmd_id: id };
    this.tracker.markPending(id);
    this.socket.send(JSON.stringify(payload));
    return id;
  }

  private dispatch(data: string): void {
    let msg: ServerMessage;
    try {
      msg = parseServerMessage(JSON.parse(data));
    } catch (err) {
      this.handlers.onError?.(`bad server message: ${String(err)}`);
      return;
    }
    switch (msg.type) {
      case "network":
        this.handlers.onNetwork?.(msg);
        break;
      case "snapshot":
        this.snapshots.post(msg);
        this.handlers.onSnapshot?.(msg);
        break;
      case "ack":
        this.tracker.settle(msg.cmd_id);
        this.handlers.onAck?.(msg.cmd_id);
        break;
      case "error":
        this.tracker.settle(msg.cmd_id);
        this.handlers.onError?.(msg.msg, msg.cmd_id);
        break;
      case "done":
        this.handlers.onDone?.(msg.world_hash);
        break;
    }
  }
}
