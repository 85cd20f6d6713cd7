# %% [markdown]
# # Model graphs and the eight mutation rules
#
# Graphs are immutable DAGs with tensors on the vertices and operators on the
# edges. Mutation rules insert sensitive operators, raise precision, or swap
# non-sensitive operators.

# %%
from thermofuzz.graph import coverage, graph_categories, topo_order, validate
from thermofuzz.mutation import RULE_NAMES, NoEligibleSite, apply_rule, eligible_sites
from thermofuzz.starters import starter_graphs

starters = starter_graphs()
for name, g in starters.items():
    print(f"{name:16s} edges={len(g.edges):2d} valid={validate(g) == []} categories={sorted(graph_categories(g))}")

# %% [markdown]
# The starters only touch two of the seven temperature-sensitive categories.

# %%
print("operator / sensitive coverage:", coverage(starters.values()))

# %% [markdown]
# Apply every rule once to the sequence model.

# %%
g = starters["sequence_rnn"]
for rule, name in RULE_NAMES.items():
    try:
        m = apply_rule(g, rule, rng_seed=rule)
    except NoEligibleSite:
        print(f"{rule} {name}: no site")
        continue
    ops = " -> ".join(e.kind.label for e in topo_order(m))
    print(f"{rule} {name} ({len(eligible_sites(g, rule))} sites)\n    {ops}")

# %% [markdown]
# Mutating repeatedly keeps the graph valid and widens coverage.

# %%
corpus = []
cur = starters["image_cnn"]
for i in range(30):
    try:
        cur = apply_rule(cur, 1 + i % 8, rng_seed=i)
    except NoEligibleSite:
        continue
    assert validate(cur) == []
    corpus.append(cur)
print("coverage after 30 mutations:", coverage(corpus))
