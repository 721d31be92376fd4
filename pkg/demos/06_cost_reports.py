"""Parameter and FLOP accounting for whole models.

Compression schemes use the shorthand "a-b-c-d-e": one partition size per
compressible layer (or per block for the ResNet-32 preset), 1 meaning dense.
Conv-only and whole-model ratios are reported separately because fully
connected layers dominate AlexNet-style models and are never compressed.
"""

from circconv import PRESETS, RESNET32_BLOCK_SCHEMES, CompressionScheme, evaluate_scheme

print("=== AlexNet (v2 shapes), scheme 1-2-2-2-2 ===")
report = evaluate_scheme(PRESETS["alexnet-v2"](), CompressionScheme.parse("1-2-2-2-2"))
print(report.to_text())

print("\n=== AlexNet conv-parameter ratios across schemes ===")
for text in ("1-2-2-2-2", "1-2-2-4-2", "1-2-4-2-2"):
    totals = evaluate_scheme(
        PRESETS["alexnet-v2"](), CompressionScheme.parse(text)
    ).totals
    print(
        f"  {text}: conv params {totals['conv_params_pct']:6.2f}%   "
        f"conv FLOPs {totals['conv_flops_pct']:6.2f}%"
    )

print("\n=== ResNet-32 block-wise schemes (15 blocks) ===")
model = PRESETS["resnet32"]()
for mid, scheme in RESNET32_BLOCK_SCHEMES.items():
    totals = evaluate_scheme(model, scheme).totals
    print(
        f"  scheme {mid} ({scheme}): params {totals['model_params']:>7} "
        f"({totals['conv_params_pct']:5.1f}% of conv), "
        f"FLOPs {totals['conv_flops_pct']:5.1f}%"
    )
