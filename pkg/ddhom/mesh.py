# -*- coding: utf-8 -*-

"""
Nested periodic structured meshes on the unit torus

Three nested grids are handled together: the coarse square mesh Q_H (and its
triangulation T_H), the microscale period eps and the fine triangulation T_h.
Every square of every grid is split along the diagonal from its lower-left to
its upper-right corner. Periodic identification is done on grid indices, so a
grid with n cells per side has exactly n * n nodes.
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import logging

import numpy as np

from .errors import AdmissibilityError


# -------------------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


MAX_CELLS = 2 ** 31 - 1
LOWER = 0  # triangle below the diagonal
UPPER = 1  # triangle above the diagonal
# vertices of the two triangle types in cell units, counter-clockwise
TRIANGLE_VERTICES = np.array([[[0, 0], [1, 0], [1, 1]],
                              [[0, 0], [1, 1], [0, 1]]], dtype=np.int64)


# -------------------------------------------------------------------------------
# Functions
# -------------------------------------------------------------------------------

def torus_distance(a, b, n):
    """ Distance between grid indices a and b on a periodic axis of length n """
    d = np.abs(np.asarray(a) - np.asarray(b)) % n
    return np.minimum(d, n - d)


def grid_triangles(n):
    """ Triangles of an n x n periodic grid

    :returns: (nodes, types), nodes is a (2 n^2, 3) array of node indices and
              types marks each triangle as LOWER or UPPER. Triangle 2 * c + k
              belongs to cell c = iy * n + ix.
    """
    iy, ix = np.divmod(np.arange(n * n, dtype=np.int64), n)
    nodes = np.empty((2 * n * n, 3), dtype=np.int64)
    types = np.tile(np.array([LOWER, UPPER], dtype=np.int64), n * n)
    for k in (LOWER, UPPER):
        for a in range(3):
            vx = (ix + TRIANGLE_VERTICES[k, a, 0]) % n
            vy = (iy + TRIANGLE_VERTICES[k, a, 1]) % n
            nodes[k::2, a] = vy * n + vx
    return nodes, types


class Patch(object):
    """ Node patch omega_i: the four coarse squares sharing the coarse node z_i """

    def __init__(self, center_node, squares, fine_interior_nodes):
        self.center_node = center_node
        self.squares = squares
        self.fine_interior_nodes = fine_interior_nodes

    def __repr__(self):
        return "Patch(center_node={}, squares={}, interior={})".format(self.center_node, self.squares, len(self.fine_interior_nodes))


class MeshHierarchy(object):
    """ Coarse square mesh Q_H, its triangulation T_H and a fine triangulation T_h on the torus

    Mesh sizes are stored as integer reciprocals: H = 1 / n_coarse, eps = 1 / n_eps, h = 1 / n_fine.
    Use :func:`build_mesh_hierarchy` to construct a validated instance.
    """

    def __init__(self, n_coarse, n_eps, n_fine):
        self.n_coarse = int(n_coarse)
        self.n_eps = int(n_eps)
        self.n_fine = int(n_fine)
        self.ratio = self.n_fine // self.n_coarse  # fine cells per coarse edge
        self.fine_triangles, self.fine_types = grid_triangles(self.n_fine)
        self.coarse_triangles, self.coarse_types = grid_triangles(self.n_coarse)
        self.__build_containment()
        self.__square_triangles = None
        self.__patches = {}

    # ---- sizes ---------------------------------------------------------------

    @property
    def H(self):
        return 1.0 / self.n_coarse

    @property
    def eps(self):
        return 1.0 / self.n_eps

    @property
    def h(self):
        return 1.0 / self.n_fine

    @property
    def fine_node_count(self):
        return self.n_fine * self.n_fine

    @property
    def coarse_node_count(self):
        return self.n_coarse * self.n_coarse

    @property
    def square_count(self):
        return self.n_coarse * self.n_coarse

    @property
    def fine_triangle_area(self):
        return 0.5 * self.h * self.h

    @property
    def square_area(self):
        return self.H * self.H

    @property
    def periods_per_square(self):
        """ H / eps, only an integer for admissible hierarchies """
        return self.n_eps / self.n_coarse

    def is_admissible(self):
        """ True when H is an integer multiple of eps """
        return self.n_eps % self.n_coarse == 0

    # ---- geometry ------------------------------------------------------------

    def fine_node_coordinates(self):
        iy, ix = np.divmod(np.arange(self.fine_node_count), self.n_fine)
        return np.column_stack((ix, iy)) * self.h

    def fine_barycenters(self):
        """ Barycenters of the fine triangles (unwrapped, inside [0, 1)^2) """
        cells = np.arange(self.n_fine * self.n_fine)
        iy, ix = np.divmod(cells, self.n_fine)
        corner = np.repeat(np.column_stack((ix, iy)), 2, axis=0).astype(float)
        offset = TRIANGLE_VERTICES.mean(axis=1)[self.fine_types]
        return (corner + offset) * self.h

    def square_corners(self):
        """ Lower-left corners of the coarse squares, row-major """
        iy, ix = np.divmod(np.arange(self.square_count), self.n_coarse)
        return np.column_stack((ix, iy)) * self.H

    def square_index(self, cx, cy):
        return (cy % self.n_coarse) * self.n_coarse + (cx % self.n_coarse)

    def coarse_node_index(self, cx, cy):
        return (cy % self.n_coarse) * self.n_coarse + (cx % self.n_coarse)

    def fine_node_index(self, ix, iy):
        return (np.asarray(iy) % self.n_fine) * self.n_fine + (np.asarray(ix) % self.n_fine)

    def __build_containment(self):
        r = self.ratio
        cells = np.repeat(np.arange(self.n_fine * self.n_fine), 2)
        iy, ix = np.divmod(cells, self.n_fine)
        cx, lx = np.divmod(ix, r)
        cy, ly = np.divmod(iy, r)
        self.fine_to_square = cy * self.n_coarse + cx
        # a fine cell on the coarse diagonal keeps its own split
        ctype = np.where(lx > ly, LOWER, np.where(lx < ly, UPPER, self.fine_types))
        self.fine_to_coarse_triangle = 2 * self.fine_to_square + ctype
        # fine vertex positions relative to the lower-left corner of the coarse square
        local = np.column_stack((lx, ly))
        self.fine_local_vertices = local[:, None, :] + TRIANGLE_VERTICES[self.fine_types]

    def square_triangles(self, square):
        """ Indices of the fine triangles inside a coarse square """
        if self.__square_triangles is None:
            order = np.argsort(self.fine_to_square, kind='stable')
            self.__square_triangles = order.reshape(self.square_count, -1)
        return self.__square_triangles[square]

    def square_nodes(self, square):
        """ Fine nodes of the closed coarse square """
        cy, cx = divmod(square, self.n_coarse)
        r = self.ratio
        ly, lx = np.divmod(np.arange((r + 1) * (r + 1)), r + 1)
        return np.unique(self.fine_node_index(cx * r + lx, cy * r + ly))

    def block_nodes(self, cx0, cy0, width):
        """ Fine nodes of the closed block of width x width coarse squares with lower-left square (cx0, cy0) """
        r = self.ratio
        ly, lx = np.divmod(np.arange((width * r + 1) ** 2), width * r + 1)
        return np.unique(self.fine_node_index(cx0 * r + lx, cy0 * r + ly))

    # ---- patches and neighbourhoods -------------------------------------------

    def node_patch(self, node):
        if node < 0 or node >= self.coarse_node_count:
            raise IndexError("Coarse node {} is out of range [0, {})".format(node, self.coarse_node_count))
        if node not in self.__patches:
            cy, cx = divmod(node, self.n_coarse)
            squares = [self.square_index(cx - 1, cy - 1), self.square_index(cx, cy - 1),
                       self.square_index(cx - 1, cy), self.square_index(cx, cy)]
            r = self.ratio
            offsets = np.arange(-(r - 1), r)
            dy, dx = np.meshgrid(offsets, offsets, indexing='ij')
            interior = self.fine_node_index(cx * r + dx.ravel(), cy * r + dy.ravel())
            self.__patches[node] = Patch(node, squares, interior)
        return self.__patches[node]

    def square_neighborhood(self, square, ell):
        if ell < 0:
            raise AdmissibilityError("Neighbourhood size must be non-negative (ell={})".format(ell))
        cy, cx = divmod(square, self.n_coarse)
        all_y, all_x = np.divmod(np.arange(self.square_count), self.n_coarse)
        near = np.maximum(torus_distance(all_x, cx, self.n_coarse), torus_distance(all_y, cy, self.n_coarse)) <= ell
        return set(np.flatnonzero(near).tolist())

    def support_squares(self, values, tol=0.0):
        """ Coarse squares holding a fine triangle with a vertex value above tol in magnitude """
        active = np.abs(np.asarray(values)) > tol
        hit = active[self.fine_triangles].any(axis=1)
        return set(np.unique(self.fine_to_square[hit]).tolist())

    def __repr__(self):
        return "MeshHierarchy(n_coarse={}, n_eps={}, n_fine={})".format(self.n_coarse, self.n_eps, self.n_fine)


def check_hierarchy(n_coarse, n_eps, n_fine, strict=True):
    """ Raise AdmissibilityError unless (N_H, N_eps, N_h) describes a valid hierarchy

    :param strict: when False, H need not be a multiple of eps (negative controls only);
                   the fine mesh must still nest into both the coarse and the eps grids.
    """
    for name, value in (('N_H', n_coarse), ('N_eps', n_eps), ('N_h', n_fine)):
        if int(value) != value or value < 1:
            raise AdmissibilityError("{} must be a positive integer (got {})".format(name, value))
    if n_coarse < 2:
        raise AdmissibilityError("N_H must be at least 2 (got {})".format(n_coarse))
    if strict and n_eps % n_coarse:
        raise AdmissibilityError("N_eps/N_H = {}/{} is not an integer: H is not a multiple of eps".format(n_eps, n_coarse))
    if n_fine % n_eps:
        raise AdmissibilityError("N_h/N_eps = {}/{} is not an integer: the fine mesh does not resolve eps".format(n_fine, n_eps))
    if n_fine % n_coarse:
        raise AdmissibilityError("N_h/N_H = {}/{} is not an integer: the fine mesh does not nest into Q_H".format(n_fine, n_coarse))
    if 2 * n_fine * n_fine > MAX_CELLS:
        raise AdmissibilityError("Fine triangle count 2*{}^2 overflows the index range".format(n_fine))


def build_mesh_hierarchy(n_coarse, n_eps, n_fine, strict=True):
    """ Build a validated mesh hierarchy

    >>> mesh = build_mesh_hierarchy(4, 16, 64)
    >>> mesh.fine_node_count, mesh.square_count, len(mesh.coarse_triangles)
    (4096, 16, 32)

    :param strict: see :func:`check_hierarchy`
    """
    check_hierarchy(n_coarse, n_eps, n_fine, strict=strict)
    if not strict and n_eps % n_coarse:
        getLogger().warning("Building an inadmissible hierarchy: H/eps = {}/{} is not an integer".format(n_eps, n_coarse))
    mesh = MeshHierarchy(n_coarse, n_eps, n_fine)
    getLogger().debug("Built {}".format(mesh))
    return mesh


def build_unit_cell_mesh(cells_per_period):
    """ Fine periodic mesh of the unit cell at scale 1 (eps = 1), used for cell problems """
    if cells_per_period < 1:
        raise AdmissibilityError("Unit cell needs at least one cell per period")
    return MeshHierarchy(1, 1, cells_per_period)


def node_patch(mesh, i):
    return mesh.node_patch(i)


def square_neighborhood(mesh, square, ell):
    return mesh.square_neighborhood(square, ell)
