#pragma once

namespace cgff {

template <class F>
void for_each_visit(const Trajectory& t, int d, F&& f) {
  (void)d;
  for (const TrajectoryPiece& p : t.pieces) {
    Point x = p.start;
    f(x);
    for (uint8_t c : p.steps) {
      x[c >> 1] += (c & 1) ? -1 : 1;
      f(x);
    }
  }
}

template <class F>
void for_each_step(const Trajectory& t, int d, F&& f) {
  (void)d;
  for (const TrajectoryPiece& p : t.pieces) {
    Point x = p.start;
    for (uint8_t c : p.steps) {
      Point y = x;
      y[c >> 1] += (c & 1) ? -1 : 1;
      f(x, y, c);
      x = y;
    }
  }
}

}  // namespace cgff
