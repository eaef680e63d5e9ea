// Minimal canvas line chart for one peer's rolling RTT series.

const THRESHOLD_MS = 60;

export function drawSeries(
  canvas: HTMLCanvasElement,
  values: readonly number[],
  capacity: number,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#fafafa";
  ctx.fillRect(0, 0, width, height);

  const yMax = Math.max(THRESHOLD_MS * 1.5, ...values) * 1.1;
  const yOf = (v: number) => height - (v / yMax) * (height - 6) - 3;
  const xOf = (i: number) => (i / Math.max(capacity - 1, 1)) * (width - 4) + 2;

  // 60 ms guide line
  ctx.strokeStyle = "#c0392b";
  ctx.setLineDash([4, 3]);
  ctx.beginPath();
  ctx.moveTo(0, yOf(THRESHOLD_MS));
  ctx.lineTo(width, yOf(THRESHOLD_MS));
  ctx.stroke();
  ctx.setLineDash([]);

  if (values.length === 0) return;
  const offset = capacity - values.length;
  ctx.strokeStyle = "#2c6aa0";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = xOf(offset + i);
    const y = yOf(v);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}
