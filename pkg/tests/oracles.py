"""Frozen reference values.

Values marked "independent" were produced once by a separate high precision
root finder (mpmath.findroot at 40 digits on the defining equations) and are
frozen here; values marked "reference" are closed-form or tabulated figures for the model.
"""

# independent: root of g_eps for p=1, nu=2, kappa=1, eps=0.01
X_EPS_P1_NU2_K1_E001 = 141.7554767276303629978712057725512553213
# independent: root of g_eps for p=1, nu=2, kappa=0.5, eps=1e-3
X_EPS_P1_NU2_K05_E0001 = 1.999998000005333316000062933088712106866
# independent: h^{-1}(1/4) and h^{-1}(1/2)
A_QUARTER = 3.920690394872886343560891352613536220526
A_HALF = 1.593624260040040092323041875875160241789
# independent: eps^2 x_eps for p=1, nu=1, kappa=1 (M=1/4), eps=1e-3
E2X_M_QUARTER_E0001 = 3.920694739437871252768433018228031024243

# reference figures
REFERENCE_X_LIMIT = 2.0  # 4p/(nu^2 - 4 kappa) for p=1, nu=2, kappa=0.5
REFERENCE_BRACKET = (141.4, 155.6)  # p=1, nu=2, kappa=1, eps=0.01
REFERENCE_A_QUARTER = 3.92
