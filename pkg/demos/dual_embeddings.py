# # Inspecting dual group embeddings
#
# Every group owns a positive and a negative embedding. The contrastive
# term pushes the two apart, so after training cos(p_i, n_i) should be
# low. This script trains briefly and prints the similarity table for the
# first three groups.
#
# Run with: python demos/dual_embeddings.py

from gprec import ExperimentConfig, build_model, train
from gprec.data import SyntheticSpec, generate_synthetic, split
from gprec.group import contrast_summary, export_similarity

world = generate_synthetic(SyntheticSpec(n_groups=4, n_interactions=20_000))
sp = split(world.dataset, seed=0)

cfg = ExperimentConfig()
cfg.group.count = 8
cfg.train.batch_size = 256
cfg.train.max_epochs = 10
model = train(build_model(sp.train.schema, cfg), sp, cfg).model

matrix, labels = export_similarity(model.group.positive, model.group.negative, [0, 1, 2])
print("      " + "  ".join(f"{name:>4}" for name in labels))
for label, row in zip(labels, matrix):
    print(f"{label:>4}  " + "  ".join(f"{v:4.2f}" for v in row))
print(contrast_summary(model.group.positive, model.group.negative))
