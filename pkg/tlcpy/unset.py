class AbsentType:
    """The type of :data:`ABSENT`, the value of a parameter that does not
    apply, such as the permeability of a parity sequence of zero length."""

    def __bool__(self):
        return False

    def __repr__(self):
        return "ABSENT"

    def __str__(self):
        return "-"

    def __reduce__(self):
        return "ABSENT"


ABSENT = AbsentType()
