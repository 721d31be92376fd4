"""The pre-trained-model workflow: convert, then retrain.

Projecting a trained dense network onto the circulant family costs some
loss, roughly tracking the projection error; a short retraining run with
the structure-preserving gradients recovers it.
"""

from circconv import (
    SgdConfig,
    convert_and_retrain,
    evaluate,
    make_dense_toy_net,
    make_toy_task,
    train,
)
from circconv.nn import ToyTaskSpec

spec = ToyTaskSpec()
data = make_toy_task(seed=0, spec=spec)
cfg = SgdConfig(batch_size=16)

dense = make_dense_toy_net(seed=1, spec=spec)
train(dense, data, cfg, steps=300, seed=2)
loss0, acc0 = evaluate(dense, *data)
print(f"dense baseline: loss {loss0:.4f}, accuracy {acc0:.3f}")

for n in (2, 4):
    _, report = convert_and_retrain(dense, n, data, cfg, retrain_steps=500, seed=3)
    print(
        f"N={n}: projection error {report['projection_sq_error']:.2f}, "
        f"loss {report['loss_before']:.4f} -> {report['loss_after_conversion']:.4f} "
        f"(converted) -> {report['loss_after_retrain']:.4f} (retrained), "
        f"accuracy {report['accuracy_after_retrain']:.3f}"
    )

print(
    "\nthe CLI equivalent: circconv convert --model-in dense.ccm --scheme 2 "
    "--model-out circ.ccm --report, then circconv train --from-model circ.ccm"
)
