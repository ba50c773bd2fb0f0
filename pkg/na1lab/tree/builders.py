"""
常用树的构造器
二叉树、随机小树、离散 Bessel(3) 游走, 以及树上的随机测度与鞅
"""

import logging
from fractions import Fraction
from typing import Dict, List, Mapping, Tuple

from na1lab.exceptions import ValidationError
from na1lab.grid.streams import stream_generator
from na1lab.tree.model import Number, TreeMeasure, TreeModel, TreeNode, parse_number


logger = logging.getLogger(__name__)


MAX_RANDOM_DEPTH = 3
MAX_RANDOM_BRANCHING = 3

# 随机树中故意构造单步套利节点的概率
ARBITRAGE_NODE_RATE = 0.15


def binomial_tree(
    depth: int,
    s0: Number = Fraction(1),
    up: Number = Fraction(2),
    down: Number = Fraction(1, 2),
    p: Number = Fraction(1, 2),
) -> TreeModel:
    """
    非重组二叉树, 节点编号为 "r", "ru", "rd", "ruu", ...
    S_up = S·up, S_down = S·down
    """
    if depth < 1:
        raise ValidationError(f"树深必须 ≥ 1: {depth}", "depth", depth)
    s0, up, down, p = (parse_number(v) for v in (s0, up, down, p))
    nodes = [TreeNode("r", None, parse_number(1), (s0,))]
    frontier = [("r", s0)]
    for _ in range(depth):
        nxt = []
        for node_id, price in frontier:
            for suffix, factor, prob in (("u", up, p), ("d", down, 1 - p)):
                child = node_id + suffix
                nodes.append(TreeNode(child, node_id, prob, (price * factor,)))
                nxt.append((child, price * factor))
        frontier = nxt
    return TreeModel(nodes)


def random_tree(
    seed: int,
    max_depth: int = MAX_RANDOM_DEPTH,
    max_branching: int = MAX_RANDOM_BRANCHING,
    dim: int = 1,
) -> TreeModel:
    """
    随机有理数小树
    部分节点的全部价格变动被平移为非负, 从而含有单步套利
    """
    if not (1 <= max_depth and 2 <= max_branching and dim >= 1):
        raise ValidationError("随机树参数非法", "random_tree")
    rng = stream_generator(seed, 0)
    depth = int(rng.integers(1, max_depth + 1))

    nodes = [TreeNode("r", None, Fraction(1), tuple(Fraction(int(rng.integers(2, 6))) for _ in range(dim)))]
    frontier = [nodes[0]]
    for _ in range(depth):
        nxt: List[TreeNode] = []
        for parent in frontier:
            k = int(rng.integers(2, max_branching + 1))
            weights = [int(w) for w in rng.integers(1, 5, k)]
            moves = [[Fraction(int(v), 2) for v in rng.integers(-3, 4, dim)] for _ in range(k)]
            if rng.random() < ARBITRAGE_NODE_RATE:
                floor = [min(move[i] for move in moves) for i in range(dim)]
                moves = [[m - f for m, f in zip(move, floor)] for move in moves]
                moves[0][0] += 1
            for j in range(k):
                child = TreeNode(
                    id=f"{parent.id}.{j}",
                    parent=parent.id,
                    prob=Fraction(weights[j], sum(weights)),
                    price=tuple(s + m for s, m in zip(parent.price, moves[j])),
                )
                nodes.append(child)
                nxt.append(child)
        frontier = nxt
    return TreeModel(nodes)


def bessel_tree(depth: int, s0: Number = Fraction(1), h: Number = Fraction(1, 4)) -> Tuple[TreeModel, Dict[str, Number]]:
    """
    离散 Bessel(3) 游走: 步长 h 的简单随机游走以 s 为 h-变换
    上行概率 (s + h) / (2s); 在 s = h 处只有上行一个分支
    :return: (树, 局部鞅紧缩因子 Y = s0 / S)
    """
    if depth < 1:
        raise ValidationError(f"树深必须 ≥ 1: {depth}", "depth", depth)
    s0, h = parse_number(s0), parse_number(h)
    if h <= 0 or s0 < h or (s0 / h) != int(s0 / h):
        raise ValidationError(f"初值必须是步长的正整数倍: s0={s0}, h={h}", "s0", s0)

    nodes = [TreeNode("r", None, parse_number(1), (s0,))]
    frontier = [("r", s0)]
    for _ in range(depth):
        nxt = []
        for node_id, s in frontier:
            if s == h:
                branches = [("u", s + h, parse_number(1))]
            else:
                p_up = (s + h) / (2 * s)
                branches = [("u", s + h, p_up), ("d", s - h, 1 - p_up)]
            for suffix, price, prob in branches:
                nodes.append(TreeNode(node_id + suffix, node_id, prob, (price,)))
                nxt.append((node_id + suffix, price))
        frontier = nxt
    tree = TreeModel(nodes)
    deflator = {node_id: s0 / tree.price(node_id)[0] for node_id in tree.node_ids()}
    logger.debug(f"Bessel 树: 深度={depth}, 节点数={len(tree)}")
    return tree, deflator


def random_measure(tree: TreeModel, seed: int) -> TreeMeasure:
    """叶子上随机正质量, 归一化为概率"""
    rng = stream_generator(seed, 1)
    leaves = tree.leaves()
    draws = [int(v) for v in rng.integers(1, 10, len(leaves))]
    total = sum(draws)
    if tree.exact:
        return TreeMeasure(tree, {leaf: Fraction(w, total) for leaf, w in zip(leaves, draws)})
    return TreeMeasure(tree, {leaf: w / total for leaf, w in zip(leaves, draws)})


def random_process(tree: TreeModel, seed: int) -> Dict[str, Number]:
    """各节点上的随机整数值(一般不是鞅)"""
    rng = stream_generator(seed, 2)
    values = rng.integers(-5, 6, len(tree))
    cast = Fraction if tree.exact else float
    return {node_id: cast(int(v)) for node_id, v in zip(tree.node_ids(), values)}


def martingale_process(tree: TreeModel, measure: TreeMeasure, terminal: Mapping[str, Number]) -> Dict[str, Number]:
    """X(v) = E_Q[X_T | v], 要求 Q 与 P 等价"""
    weighted: Dict[str, Number] = {}
    for node_id in reversed(list(tree.preorder())):
        children = tree.children(node_id)
        if children:
            weighted[node_id] = sum((weighted[c] for c in children), tree.zero())
        else:
            weighted[node_id] = measure.mass(node_id) * terminal[node_id]
    return {node_id: weighted[node_id] / measure.mass(node_id) for node_id in tree.node_ids()}
