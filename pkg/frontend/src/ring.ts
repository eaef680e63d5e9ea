// Bounded rolling series backing the live charts. The page must stay
// usable over multi-hour sessions, so history never grows past the cap.

export class RollingSeries {
  private buffer: number[] = [];

  constructor(readonly capacity = 120) {
    if (capacity < 1) throw new Error("capacity must be >= 1");
  }

  push(value: number): void {
    this.buffer.push(value);
    if (this.buffer.length > this.capacity) {
      this.buffer.splice(0, this.buffer.length - this.capacity);
    }
  }

  values(): readonly number[] {
    return this.buffer;
  }

  get length(): number {
    return this.buffer.length;
  }

  get latest(): number | undefined {
    return this.buffer[this.buffer.length - 1];
  }
}
