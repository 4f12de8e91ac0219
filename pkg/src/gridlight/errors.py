"""Exception hierarchy shared by all gridlight modules."""


class GridlightError(Exception):
    """Base class for every error raised by gridlight."""


# file format

class FormatError(GridlightError):
    pass


class BadMagic(FormatError):
    pass


class TruncatedHeader(FormatError):
    pass


class UnsupportedFeature(FormatError):
    pass


class InvalidSchema(FormatError):
    pass


class IoFailure(GridlightError):
    pass


class NoCoordinateVariable(GridlightError):
    pass


class NonMonotonicAxis(GridlightError):
    pass


class OutOfBounds(GridlightError):
    pass


class UnknownVariable(GridlightError):
    pass


# catalog

class CatalogError(GridlightError):
    pass


class EmptyFileList(CatalogError):
    pass


class SchemaInferenceFailure(CatalogError):
    pass


class UnknownSpanningDim(CatalogError):
    pass


class SchemaMismatch(CatalogError):
    def __init__(self, file, detail):
        super().__init__(f"{file}: {detail}")
        self.file = file
        self.detail = detail


class ParseFailure(CatalogError):
    def __init__(self, file, line, detail=""):
        super().__init__(f"{file}:{line}: {detail}")
        self.file = file
        self.line = line


class ArityMismatch(ParseFailure):
    pass


class UnparsableUnits(CatalogError):
    pass


# query language

class QueryError(GridlightError):
    pass


class QuerySyntaxError(QueryError):
    def __init__(self, position, expected, found=None):
        expected = sorted(set(expected))
        msg = f"syntax error at position {position}: expected {' | '.join(expected)}"
        if found is not None:
            msg += f", found {found!r}"
        super().__init__(msg)
        self.position = position
        self.expected = expected
        self.found = found


class UnknownDataset(QueryError):
    pass


class UnknownColumn(QueryError):
    pass


class TypeMismatch(QueryError):
    pass


class PredicateTooComplex(QueryError):
    pass


class DomainError(QueryError):
    def __init__(self, func, row):
        super().__init__(f"{func}: argument outside its domain at row {row}")
        self.func = func
        self.row = row


class EnvelopeMissing(QueryError):
    pass


# block cover

class CoverError(GridlightError):
    pass


class DimensionMismatch(CoverError):
    pass


class CoverTooLarge(CoverError):
    pass


class OutOfDomain(CoverError):
    pass


class SplitImpossible(CoverError):
    pass


class InvalidParams(CoverError):
    pass
