"""Frozen inequality-checker constants.

C* for each lemma is twice the worst ratio observed on the reference
trial family (analysis.trial_family); analysis.calibrate_constants()
recomputes both tables and a regression test keeps this file honest.
Regenerate by pasting its output here if the family or the quadrature
grids ever change."""

C_STAR = {
    "weighted-sobolev": 2.9261380771605815e-05,
    "hardy": 0.08348134991057433,
    "klainerman-sobolev": 0.4429251348444778,
}

FAMILY_RATIOS = {
    "weighted-sobolev": {
        "gauss-m1": 2.815113940715656e-06,
        "gauss-m3": 5.52891507083911e-06,
        "gauss-m6": 1.6465661208517642e-06,
        "gauss-shift": 1.354663735755433e-07,
        "gauss-y": 4.246027226359003e-06,
        "bump-near": 3.141661681913687e-07,
        "bump-far": 1.0121887186940711e-07,
        "bump-y": 4.5444420604981136e-07,
        "bump-weighted": 9.27194586041485e-09,
        "cone-static": 1.6577532134291836e-06,
        "cone-origin": 5.766490878394662e-08,
        "cone-travel": 1.4630690385802907e-05,
    },
    "hardy": {
        "bump-near": 0.03737251633242995,
        "bump-far": 0.03058449161129981,
        "bump-y": 0.04174067495528717,
        "bump-weighted": 0.007159638528405985,
    },
    "klainerman-sobolev": {
        "gauss-y": 0.08107971378858278,
        "cone-static": 0.001186935495578427,
        "cone-origin": 0.0897070497976828,
        "cone-travel": 0.2214625674222389,
    },
}
