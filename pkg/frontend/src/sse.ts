/** Incremental parser for text/event-stream payloads. */

export interface SseRecord {
  event: string;
  data: any;
}

export class SseParser {
  private buffer = "";

  /** Feed a chunk; returns every complete record it terminated. */
  push(chunk: string, flush = false): SseRecord[] {
    this.buffer += chunk;
    const records: SseRecord[] = [];
    for (;;) {
      const cut = this.buffer.indexOf("\n\n");
      if (cut < 0) break;
      const block = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      const record = this.parseBlock(block);
      if (record) records.push(record);
    }
    if (flush && this.buffer.trim()) {
      const record = this.parseBlock(this.buffer);
      this.buffer = "";
      if (record) records.push(record);
    }
    return records;
  }

  private parseBlock(block: string): SseRecord | null {
    let event = "";
    let data = "";
    for (const line of block.split("\n")) {
      if (line.startsWith("event:")) event = line.slice(6).trim();
      else if (line.startsWith("data:")) data += line.slice(5).trim();
    }
    if (!event || !data) return null;
    try {
      return { event, data: JSON.parse(data) };
    } catch {
      return null;
    }
  }
}
