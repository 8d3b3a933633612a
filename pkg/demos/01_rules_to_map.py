"""
From declarative rules to an exact MAP assignment
=================================================

A two-tweet walkthrough: write a rule program, score its groundings with
untrained (random) classifiers, compile everything into a 0-1 linear
program, and watch the hard constraints override a tempting label.
"""

from opinionlab import (
    EMConfig,
    default_program,
    evaluate_objective,
    ground,
    initial_suite,
    make_tweet,
    render_program,
    solve_map,
    write_lp,
)

# The bundled program: five base classifiers, four couplings, three
# consistency constraints. render_program gives back the same text that
# parse_program accepts, so programs are plain files you can diff.
program = default_program()
print(render_program(program))

tweets = [
    make_tweet("t1", "the government decided for everyone #novaccineforme",
               mentions=[{"id": "m1", "start": 4, "end": 14}]),
    make_tweet("t2", "grateful the government funded the clinics #getvaccinated",
               mentions=[{"id": "m2", "start": 13, "end": 23}]),
]

# A suite of random scorers is enough to show the machinery; training is
# demo 02's job.
suite = initial_suite(program, EMConfig(hash_bits=8, seed=3))
problem = ground(program, tweets, suite)
print(f"\n{len(problem.blocks)} atom blocks, {problem.n_atoms} indicators, "
      f"{len(problem.rules)} weighted groundings, "
      f"{len(problem.constraints)} hard constraints")

# The whole thing is one small integer program. write_lp dumps it in LP
# format if you want to eyeball the rows another solver would see.
lp_text, _names = write_lp(problem)
print("\nfirst LP rows:")
print("\n".join(lp_text.splitlines()[:8]))

result = solve_map(problem)
print(f"\nMAP objective {result.objective:.3f}")
for tid in ("t1", "t2"):
    print(f"  {tid}: IsMoral={result.label('IsMoral', tid)} "
          f"HasMF={result.label('HasMF', tid)} "
          f"VaxStance={result.label('VaxStance', tid)}")
print(f"  m1: role={result.label('HasRole', 'm1')} "
      f"polarity={result.label('EntPolarity', 'm1')}")

# Hard constraints at work: seed IsMoral(t1)=False and the foundation is
# forced to None no matter how much weight any rule puts elsewhere.
seeded = ground(program, tweets, suite, seeds={("IsMoral", ("t1",)): False})
forced = solve_map(seeded)
print(f"\nwith IsMoral(t1) seeded False: HasMF(t1)={forced.label('HasMF', 't1')}")
assert forced.label("HasMF", "t1") == "None"

# The printed objective is recomputable from the assignment alone.
check = evaluate_objective(problem, result.indicator_vector)
print(f"objective recomputed from the vector: {check:.3f}")
