# Which samples lose their text?
#
# A plan ranks samples by one seeded permutation and keeps the first
# floor(pct * n / 100).  Lowering the percentage only ever removes samples, so
# a sweep from 100% down to 10% degrades the same test set step by step.
from modalpix.modality_mask import make_plan

ids = [f"s{i:02d}" for i in range(20)]
previous = None
for pct in (100, 90, 70, 50, 30, 10, 0):
    plan = make_plan(ids, image_pct=100, text_pct=pct, seed=11)
    kept = plan.kept("text")
    line = "".join("#" if e.text_present else "." for e in plan.entries)
    nested = previous is None or kept <= previous
    print(f"text {pct:3d}%  {line}  kept {len(kept):2d}  nested={nested}")
    previous = kept

# a different seed picks different samples, with the same counts
other = make_plan(ids, 100, 50, seed=12).kept("text")
print("seed 11 vs 12 at 50%: overlap", len(make_plan(ids, 100, 50, seed=11).kept("text") & other), "of 10")
