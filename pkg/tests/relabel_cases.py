"""Fixed relabel decision cases.

Each case is ``(vector, value_kind, head_kind, temperature, gamma, top_m,
expected_position, expected_score)``; ``expected_position`` is ``None`` for an
unknown label. The first 25 cases are worked by hand; the remaining 25 were
produced once by ``oracles.ratio_rule`` from seed 2024 and frozen here.
"""

P, L = "probabilities", "logits"
SM, SG = "softmax", "sigmoid"

HAND = [
    ([0.60, 0.10, 0.05], P, SG, 1.0, 4.0, 3, 0, 0.60),
    ([0.30, 0.25, 0.20], P, SG, 1.0, 1.5, 3, None, 0.75),
    # Zero runner-up: infinite ratio, always known.
    ([0.5, 0.0, 0.0], P, SG, 1.0, 50.0, 3, 0, 0.5),
    ([0.5, 0.0, 0.0], P, SG, 1.0, 1e9, 3, 0, 0.5),
    ([0.0, 0.0, 0.0], P, SG, 1.0, 2.0, 3, 0, 0.0),
    ([0.0, 0.7, 0.0], P, SG, 1.0, 2.0, 3, 1, 0.7),
    # Exact ties: ratio 1, argmax resolves to the lowest position.
    ([0.4, 0.4, 0.2], P, SM, 1.0, 1.5, 3, None, 1.0),
    ([0.4, 0.4, 0.2], P, SM, 1.0, 1.0, 3, 0, 0.4),
    ([0.3, 0.3, 0.3], P, SG, 1.0, 0.5, 3, 0, 0.3),
    ([0.2, 0.5, 0.5], P, SG, 1.0, 0.9, 2, 1, 0.5),
    # Ratio exactly at gamma counts as known.
    ([0.5, 0.25, 0.25], P, SM, 1.0, 2.0, 3, 0, 0.5),
    ([0.2, 0.5, 0.3], P, SM, 1.0, 1.5, 3, 1, 0.5),
    ([0.2, 0.5, 0.3], P, SM, 1.0, 2.0, 3, None, 1.0),
    # Summation depth.
    ([0.3, 0.25, 0.2], P, SG, 1.0, 1.5, 1, None, 0.3),
    ([0.3, 0.25, 0.2], P, SG, 1.0, 1.5, 2, None, 0.55),
    ([0.5, 0.5], P, SM, 1.0, 1.5, 2, None, 1.0),
    ([0.9, 0.8, 0.1], P, SG, 1.0, 1.5, 3, None, 1.8),
    ([0.9, 0.1, 0.05], P, SG, 1.0, 4.0, 3, 0, 0.9),
    # Softmax logits: softmax([2, 1, 0]) = [0.66524, 0.24473, 0.09003]; ratio e.
    ([2.0, 1.0, 0.0], L, SM, 1.0, 2.5, 3, 0, 0.6652409557748219),
    ([2.0, 1.0, 0.0], L, SM, 1.0, 3.0, 3, None, 1.0),
    # T = 2 halves the logit gap: ratio exp(0.5) = 1.6487.
    ([2.0, 1.0, 0.0], L, SM, 2.0, 1.5, 3, 0, 0.506480391055654),
    ([2.0, 1.0, 0.0], L, SM, 2.0, 2.0, 3, None, 1.0),
    # Temperature limits: huge T flattens to a tie, tiny T underflows the runner-up.
    ([2.0, 1.0, 0.0], L, SM, 1e6, 1.0001, 3, None, 1.0),
    ([2.0, 1.0, 0.0], L, SM, 1e-3, 50.0, 3, 0, 1.0),
    # Sigmoid logits: sigma(0) = 0.5 everywhere.
    ([0.0, 0.0, 0.0], L, SG, 1.0, 1.5, 3, None, 1.5),
]

ORACLE = [
    ([0.7282642914232076, 0.3037513583913575, 0.8872982690000151, 0.41008858946872573, 0.7166143935816427], 'probabilities', 'sigmoid', 1.0, 5.0, 5, None, 3.046016901864949),
    ([-1.491, 1.942, -1.049], 'logits', 'sigmoid', 1.0, 10.0, 3, None, 1.3177605548032347),
    ([0.689222550038924, 0.7276879285911709], 'probabilities', 'sigmoid', 1.0, 3.0, 1, None, 0.7276879285911709),
    ([0.2823528804241922, 0.2303226137936165, 0.1706822576303052, 0.26573012420903974, 0.05091212394284631], 'probabilities', 'softmax', 1.0, 10.0, 4, None, 0.9490878760571536),
    ([-0.932, 0.481, -1.708, -2.224], 'logits', 'softmax', 5.0, 4.0, 2, None, 0.5882459922426893),
    ([0.7619179861204386, 0.9710555141077365], 'probabilities', 'sigmoid', 1.0, 5.0, 2, None, 1.7329735002281752),
    ([1.327, -1.355, -1.175, -1.998, -2.852, 0.195], 'logits', 'sigmoid', 1.0, 3.0, 2, None, 1.338940075213256),
    ([2.226, -2.322, -1.588, -0.209], 'logits', 'sigmoid', 1.0, 10.0, 4, None, 1.6094822262389787),
    ([0.3318134242633193, 0.20691064433024053, 0.686573222767188], 'probabilities', 'sigmoid', 1.0, 2.0, 1, 2, 0.686573222767188),
    ([0.43813802081227393, 0.23568525426302467], 'probabilities', 'sigmoid', 1.0, 4.0, 1, None, 0.43813802081227393),
    ([2.788, 0.15, 2.219], 'logits', 'softmax', 2.0, 50.0, 3, None, 1.0),
    ([0.233, 0.731, -0.35, 1.022, -0.8], 'logits', 'sigmoid', 1.0, 2.0, 4, None, 2.381756985504576),
    ([0.7843170343980115, 0.17611807968667148, 0.850172156268633], 'probabilities', 'sigmoid', 1.0, 10.0, 2, None, 1.6344891906666446),
    ([-1.289, 2.94], 'logits', 'sigmoid', 1.0, 2.0, 1, 1, 0.9497887268097336),
    ([0.3094335329076027, 0.564912425629124, 0.12565404146327316], 'probabilities', 'softmax', 1.0, 2.0, 3, None, 0.9999999999999999),
    ([0.488049809515, 0.7989279831337961, 0.16506985695686638], 'probabilities', 'sigmoid', 1.0, 2.0, 1, None, 0.7989279831337961),
    ([0.274070482516262, 0.2006990307899305, 0.274440449294965, 0.20413015725333228, 0.010193307889399995, 0.03646657225611007], 'probabilities', 'softmax', 1.0, 3.0, 5, None, 0.9898066921105999),
    ([0.14478227952545825, 0.034078725246992424, 0.07244984047299963, 0.7486891547545497], 'probabilities', 'softmax', 1.0, 4.0, 2, 3, 0.7486891547545497),
    ([-1.247, 0.678, 1.598], 'logits', 'sigmoid', 1.0, 50.0, 3, None, 1.7182507291249625),
    ([0.4002034931356476, 0.8666965473348861, 0.8637188927711709, 0.5943830065655104, 0.1337766117035274], 'probabilities', 'sigmoid', 1.0, 4.0, 2, None, 1.730415440106057),
    ([0.412, 1.189, -0.333, 0.096], 'logits', 'sigmoid', 1.0, 10.0, 1, None, 0.7665621673196448),
    ([-0.301, -0.465, -1.975], 'logits', 'sigmoid', 1.0, 1.5, 2, None, 0.811113400316861),
    ([0.1794299125770904, 0.1946460512982862, 0.31676480305779353, 0.3091592330668299], 'probabilities', 'softmax', 1.0, 3.0, 2, None, 0.6259240361246234),
    ([0.22585690724542745, 0.2312791054295354, 0.018448557377379386, 0.2412403166232306, 0.04780849832682734, 0.23536661499759984], 'probabilities', 'softmax', 1.0, 5.0, 3, None, 0.7078860370503658),
    ([0.36289801323818494, 0.46626967881707204, 0.43385549593228523, 0.49193803677928927, 0.32634197294722844], 'probabilities', 'sigmoid', 1.0, 1.5, 1, None, 0.49193803677928927),
]

CASES = HAND + ORACLE
