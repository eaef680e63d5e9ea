// Bounded rolling series backing the live charts. The page must stay
// usable over multi-hour sessions, so history never grows past the cap.
export class RollingSeries {
    constructor(capacity = 120) {
        this.capacity = capacity;
        this.buffer = [];
        if (capacity < 1)
            throw new Error("capacity must be >= 1");
    }
    push(value) {
        this.buffer.push(value);
        if (this.buffer.length > this.capacity) {
            this.buffer.splice(0, this.buffer.length - this.capacity);
        }
    }
    values() {
        return this.buffer;
    }
    get length() {
        return this.buffer.length;
    }
    get latest() {
        return this.buffer[this.buffer.length - 1];
    }
}
