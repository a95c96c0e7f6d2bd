"""
Locating a disturbance from wavefront arrival times
===================================================

Four recorders on a 400-mile square time-stamp a frequency disturbance that
travels at 500 miles/s. One forged time stamp drags the triangulated event
far from where it happened.
"""

import math

from tsagrid.event_location import apply_timestamp_attack, grid_search_event, locate_event, synthesize_arrivals

mmrs = [(0.0, 0.0), (400.0, 0.0), (0.0, 400.0), (400.0, 400.0)]
event = (120.0, 160.0, 0.0)
records = synthesize_arrivals(event, mmrs)
for r in records:
    print(f"{r.id}: ({r.x:.0f}, {r.y:.0f}) arrival {r.t_arrival * 1e3:.2f} ms")

sol = locate_event(records)
print(f"clean fix: ({sol.x_e:.6f}, {sol.y_e:.6f}) after {sol.iterations} iterations")

for delta in (0.05, 0.1, 0.2, 0.4):
    hit = locate_event(apply_timestamp_attack(records, "MMR4", delta))
    moved = math.hypot(hit.x_e - event[0], hit.y_e - event[1])
    print(f"MMR4 stamp +{delta:.2f} s -> ({hit.x_e:7.1f}, {hit.y_e:7.1f}), {moved:6.1f} miles off")

# cross-check the 0.2 s case against an exhaustive search
x, y, t, cost, cell = grid_search_event(apply_timestamp_attack(records, "MMR4", 0.2), n=1001)
print(f"grid oracle: ({x:.1f}, {y:.1f}) with cell {cell[0]:.2f} mi")
